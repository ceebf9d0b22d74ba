#include "cascadelab/posthoc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cascadelab/base64.hpp"
#include "cascadelab/parallel.hpp"

namespace cascadelab {

namespace {
constexpr int kFormatVersion = 1;
}  // namespace

std::string to_string(PosthocTargetKind kind) {
    switch (kind) {
        case PosthocTargetKind::kDiff01: return "diff-01";
        case PosthocTargetKind::kDiffProb: return "diff-prob";
        case PosthocTargetKind::kMaxProb: return "maxprob";
    }
    throw ConfigError("unknown post-hoc target kind");
}

PosthocTargetKind posthoc_target_from_string(const std::string& name) {
    if (name == "diff-01") return PosthocTargetKind::kDiff01;
    if (name == "diff-prob") return PosthocTargetKind::kDiffProb;
    if (name == "maxprob") return PosthocTargetKind::kMaxProb;
    throw ConfigError("unknown post-hoc target kind: " + name);
}

std::vector<double> extract_features(const ProbVector& p1) {
    const std::size_t L = p1.num_classes();
    std::vector<double> features;
    features.reserve(L + 11);
    features.push_back(entropy(p1));
    std::vector<double> sorted(p1.values());
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    for (std::size_t i = 0; i < 10; ++i) {
        features.push_back(i < sorted.size() ? sorted[i] : 0.0);
    }
    const std::size_t top = static_cast<std::size_t>(argmax_label(p1));
    for (std::size_t c = 0; c < L; ++c) features.push_back(c == top ? 1.0 : 0.0);
    return features;
}

std::vector<PosthocPair> make_targets(const Dataset& ds, const Classifier& model1,
                                      const Classifier& model2, PosthocTargetKind kind) {
    if (model1.num_classes() != ds.num_classes() || model2.num_classes() != ds.num_classes()) {
        throw ShapeError("make_targets: model/dataset class counts differ");
    }
    std::vector<PosthocPair> pairs(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
        const LabeledExample& ex = ds[i];
        const ProbVector p1 = model1.predict_proba(ex.x);
        const ProbVector p2 = model2.predict_proba(ex.x);
        const int h1 = argmax_label(p1);
        const int h2 = argmax_label(p2);
        double target = 0.0;
        switch (kind) {
            case PosthocTargetKind::kDiff01:
                target = (ex.y == h2 ? 1.0 : 0.0) - (ex.y == h1 ? 1.0 : 0.0);
                break;
            case PosthocTargetKind::kDiffProb:
                target = p2[static_cast<std::size_t>(ex.y)] - p1[static_cast<std::size_t>(ex.y)];
                break;
            case PosthocTargetKind::kMaxProb:
                target = p2[static_cast<std::size_t>(h2)];
                break;
        }
        pairs[i] = {extract_features(p1), target};
    });
    return pairs;
}

std::pair<Dataset, Dataset> validation_split(const Dataset& ds, double fraction, RngSeed seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("validation fraction must be in (0,1)");
    }
    const std::size_t n = ds.size();
    const std::size_t heldout_count =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (heldout_count == 0 || heldout_count == n) {
        throw ConfigError("validation fraction leaves an empty part");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<bool> in_heldout(n, false);
    for (std::size_t i = 0; i < heldout_count; ++i) in_heldout[order[i]] = true;

    std::vector<LabeledExample> train_part, heldout_part;
    train_part.reserve(n - heldout_count);
    heldout_part.reserve(heldout_count);
    for (std::size_t i = 0; i < n; ++i) {
        (in_heldout[i] ? heldout_part : train_part).push_back(ds[i]);
    }
    return {Dataset(std::move(train_part), ds.num_classes()),
            Dataset(std::move(heldout_part), ds.num_classes())};
}

double posthoc_loss(const PosthocModel& model, const std::vector<PosthocPair>& pairs) {
    double total = 0.0;
    for (const auto& pair : pairs) {
        const double residual = model.predict(pair.features) - pair.target;
        total += model.target_kind == PosthocTargetKind::kDiffProb ? std::abs(residual)
                                                                   : residual * residual;
    }
    return total / static_cast<double>(pairs.size());
}

PosthocTrainResult train_posthoc(const std::vector<PosthocPair>& pairs,
                                 const PosthocHyperparams& hp, RngSeed seed,
                                 PosthocTargetKind kind, int num_classes,
                                 const std::vector<PosthocPair>* heldout) {
    if (pairs.empty()) throw ConfigError("train_posthoc: no training pairs");
    const int feature_dim = static_cast<int>(pairs.front().features.size());
    if (feature_dim != num_classes + 11) {
        throw ShapeError("post-hoc feature length " + std::to_string(feature_dim) +
                         " != L + 11 for L = " + std::to_string(num_classes));
    }

    std::vector<int> sizes;
    sizes.push_back(feature_dim);
    for (int h : hp.hidden_sizes) sizes.push_back(h);
    sizes.push_back(1);

    PosthocTrainResult result;
    result.model.target_kind = kind;
    result.model.num_classes = num_classes;
    result.model.mlp = init_mlp(sizes, derive_seed(seed, 0));

    AdamConfig adam;
    adam.learning_rate = hp.learning_rate;
    adam.l2 = hp.l2;
    OptimizerState opt = make_adam_state(result.model.mlp, adam);
    MlpGradients grads = make_gradients(result.model.mlp);
    MlpForwardCache cache;

    const bool absolute = kind == PosthocTargetKind::kDiffProb;
    const std::size_t n = pairs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(hp.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(hp.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            grads.set_zero();
            for (std::size_t i = start; i < end; ++i) {
                const PosthocPair& pair = pairs[order[i]];
                const double out = mlp_forward_cached(result.model.mlp, pair.features, cache)[0];
                const double residual = out - pair.target;
                double grad_out;
                if (absolute) {
                    epoch_loss += std::abs(residual);
                    grad_out = residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
                } else {
                    epoch_loss += residual * residual;
                    grad_out = 2.0 * residual;
                }
                mlp_backward(result.model.mlp, cache, {grad_out * inv_batch}, grads);
            }
            adam_step(opt, result.model.mlp, grads);
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw TrainingDivergenceError("post-hoc training loss diverged at epoch " +
                                          std::to_string(epoch));
        }
        result.train_loss_curve.push_back(epoch_loss);
        if (heldout != nullptr && !heldout->empty()) {
            result.heldout_loss_curve.push_back(posthoc_loss(result.model, *heldout));
        }
    }
    result.final_train_loss = posthoc_loss(result.model, pairs);
    return result;
}

void save_model(const PosthocModel& model, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["format_version"] = kFormatVersion;
    doc["target_kind"] = to_string(model.target_kind);
    doc["num_classes"] = model.num_classes;
    doc["layer_sizes"] = model.mlp.layer_sizes;
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& block : model.mlp.weights) weights.push_back(base64_encode_doubles(block));
    nlohmann::json biases = nlohmann::json::array();
    for (const auto& block : model.mlp.biases) biases.push_back(base64_encode_doubles(block));
    doc["weights"] = std::move(weights);
    doc["biases"] = std::move(biases);

    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

PosthocModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("model file " + path.string() + ": " + e.what());
    }
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != kFormatVersion) {
            throw ParseError("unsupported model format_version " + std::to_string(version));
        }
        PosthocModel model;
        model.target_kind = posthoc_target_from_string(doc.at("target_kind").get<std::string>());
        model.num_classes = doc.at("num_classes").get<int>();
        model.mlp.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
        for (const auto& block : doc.at("weights")) {
            model.mlp.weights.push_back(base64_decode_doubles(block.get<std::string>()));
        }
        for (const auto& block : doc.at("biases")) {
            model.mlp.biases.push_back(base64_decode_doubles(block.get<std::string>()));
        }
        if (model.mlp.weights.size() + 1 != model.mlp.layer_sizes.size() ||
            model.mlp.biases.size() != model.mlp.weights.size()) {
            throw ParseError("model file layer structure is inconsistent");
        }
        for (std::size_t l = 0; l < model.mlp.weights.size(); ++l) {
            const auto expect_w = static_cast<std::size_t>(model.mlp.layer_sizes[l]) *
                                  static_cast<std::size_t>(model.mlp.layer_sizes[l + 1]);
            const auto expect_b = static_cast<std::size_t>(model.mlp.layer_sizes[l + 1]);
            if (model.mlp.weights[l].size() != expect_w || model.mlp.biases[l].size() != expect_b) {
                throw ParseError("model file parameter block sizes do not match layer_sizes");
            }
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file " + path.string() + ": " + e.what());
    }
}

}  // namespace cascadelab
