#include "cascadelab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cascadelab/dataset.hpp"
#include "cascadelab/deferral.hpp"
#include "cascadelab/model_io.hpp"
#include "cascadelab/models.hpp"
#include "cascadelab/posthoc.hpp"
#include "cascadelab/worlds.hpp"

namespace cascadelab {

namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kCurveHeader =
    "rule,scenario,seed,threshold,deferral_rate,accuracy,risk,relative_cost";

// Derived-seed stream tags; distinct per purpose so adding a consumer never
// shifts another one's stream.
enum SeedTag : std::uint64_t {
    kSeedTrainSample = 10,
    kSeedTrainNoise = 11,
    kSeedSplit = 12,
    kSeedTestSample = 20,
    kSeedTestNoise = 21,
    kSeedModelBase = 30,         // + model index
    kSeedPosthocBase = 60,       // + 10 * stage + target index
    kSeedRandomRule = 50,
};

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (allowed.find(key) == allowed.end()) {
            throw ParseError("unknown key '" + key + "' in " + where);
        }
    }
}

double require_number(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError(where + " is missing '" + key + "'");
    if (!obj[key].is_number()) throw ParseError(where + "." + key + " must be a number");
    return obj[key].get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback,
                 const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ParseError(where + "." + key + " must be a number");
    return obj[key].get<double>();
}

std::vector<double> number_array(const json& value, const std::string& where) {
    if (!value.is_array()) throw ParseError(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : value) {
        if (!v.is_number()) throw ParseError(where + " must contain numbers only");
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<int> int_array(const json& value, const std::string& where) {
    const auto doubles = number_array(value, where);
    std::vector<int> out;
    for (double v : doubles) out.push_back(static_cast<int>(v));
    return out;
}

std::shared_ptr<const SyntheticWorld> parse_world(const json& spec) {
    check_keys(spec, {"kind", "support", "means", "stddev", "stddevs", "priors", "num_classes",
                      "dim", "layout", "radius", "positions"},
               "world");
    if (!spec.contains("kind")) throw ParseError("world is missing 'kind'");
    const std::string kind = spec["kind"].get<std::string>();

    if (kind == "discrete") {
        if (!spec.contains("support")) throw ParseError("discrete world needs 'support'");
        std::vector<DiscreteWorld::SupportPoint> support;
        for (const auto& pt : spec["support"]) {
            check_keys(pt, {"x", "prob", "posterior"}, "world.support[]");
            support.push_back({number_array(pt.at("x"), "support.x"),
                               require_number(pt, "prob", "world.support[]"),
                               ProbVector(number_array(pt.at("posterior"), "support.posterior"))});
        }
        return std::make_shared<DiscreteWorld>(std::move(support));
    }
    if (kind == "gaussian-mixture") {
        std::vector<GaussianMixtureWorld::Component> components;
        if (spec.contains("means")) {
            const auto& means = spec["means"];
            if (!means.is_array() || means.empty()) {
                throw ParseError("world.means must be a nonempty array");
            }
            const std::size_t L = means.size();
            std::vector<double> stddevs(L, number_or(spec, "stddev", 1.0, "world"));
            if (spec.contains("stddevs")) stddevs = number_array(spec["stddevs"], "world.stddevs");
            std::vector<double> priors(L, 1.0 / static_cast<double>(L));
            if (spec.contains("priors")) priors = number_array(spec["priors"], "world.priors");
            if (stddevs.size() != L || priors.size() != L) {
                throw ParseError("world.means/stddevs/priors lengths differ");
            }
            for (std::size_t c = 0; c < L; ++c) {
                components.push_back({number_array(means[c], "world.means[]"),
                                      stddevs[c], priors[c]});
            }
        } else {
            // generated layout: class means on a ring in the first two dims
            const int L = static_cast<int>(require_number(spec, "num_classes", "world"));
            const int dim = static_cast<int>(number_or(spec, "dim", 2.0, "world"));
            const double radius = number_or(spec, "radius", 4.0, "world");
            const double stddev = number_or(spec, "stddev", 1.0, "world");
            const std::string layout =
                spec.contains("layout") ? spec["layout"].get<std::string>() : "ring";
            if (layout != "ring") throw ParseError("unknown world layout '" + layout + "'");
            if (L < 2 || dim < 2) throw ParseError("generated world needs num_classes, dim >= 2");
            // optional permutation of ring slots, e.g. to interleave class
            // groups geometrically
            std::vector<int> positions(static_cast<std::size_t>(L));
            std::iota(positions.begin(), positions.end(), 0);
            if (spec.contains("positions")) {
                positions = int_array(spec["positions"], "world.positions");
                std::vector<int> sorted(positions);
                std::sort(sorted.begin(), sorted.end());
                std::vector<int> want(static_cast<std::size_t>(L));
                std::iota(want.begin(), want.end(), 0);
                if (sorted != want) {
                    throw ParseError("world.positions must be a permutation of 0..L-1");
                }
            }
            for (int c = 0; c < L; ++c) {
                std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
                const double angle = 2.0 * M_PI *
                                     static_cast<double>(positions[static_cast<std::size_t>(c)]) /
                                     static_cast<double>(L);
                mean[0] = radius * std::cos(angle);
                mean[1] = radius * std::sin(angle);
                components.push_back({std::move(mean), stddev, 1.0 / static_cast<double>(L)});
            }
        }
        return std::make_shared<GaussianMixtureWorld>(std::move(components));
    }
    throw ParseError("unknown world kind '" + kind + "'");
}

struct ParsedTransforms {
    std::optional<LabelNoiseTransform> label_noise;
    std::optional<SpecialistSplitTransform> specialist;
    std::optional<LongTailTransform> long_tail;
};

ParsedTransforms parse_transforms(const json& list) {
    ParsedTransforms out;
    if (!list.is_array()) throw ParseError("transforms must be an array");
    for (const auto& t : list) {
        if (!t.contains("kind")) throw ParseError("transform is missing 'kind'");
        const std::string kind = t["kind"].get<std::string>();
        if (kind == "label-noise") {
            check_keys(t, {"kind", "classes", "flip_prob"}, "label-noise transform");
            LabelNoiseTransform noise;
            noise.noisy_classes = int_array(t.at("classes"), "label-noise.classes");
            noise.flip_prob = number_or(t, "flip_prob", 1.0, "label-noise");
            out.label_noise = std::move(noise);
        } else if (kind == "specialist-split") {
            check_keys(t, {"kind", "good_classes"}, "specialist-split transform");
            SpecialistSplitTransform split;
            split.good_classes = int_array(t.at("good_classes"), "specialist-split.good_classes");
            out.specialist = std::move(split);
        } else if (kind == "long-tail-skew") {
            check_keys(t, {"kind", "head_classes", "head_weight", "tail_weight"},
                       "long-tail-skew transform");
            LongTailTransform tail;
            tail.head_classes = static_cast<int>(require_number(t, "head_classes", "long-tail"));
            tail.head_weight = number_or(t, "head_weight", 10.0, "long-tail");
            tail.tail_weight = number_or(t, "tail_weight", 1.0, "long-tail");
            out.long_tail = tail;
        } else {
            throw ParseError("unknown transform kind '" + kind + "'");
        }
    }
    return out;
}

struct ModelSpec {
    std::string kind;
    std::string world_choice = "train";  // analytic kinds: base or train world
    double temperature = 2.0;
    double eps_good = 0.02;
    double eps_bad = 0.02;
    TrainHyperparams train;
};

ModelSpec parse_model(const json& spec, std::size_t index) {
    const std::string where = "models[" + std::to_string(index) + "]";
    check_keys(spec, {"kind", "world", "temperature", "eps_good", "eps_bad", "hidden", "epochs",
                      "batch_size", "learning_rate", "l2"},
               where);
    ModelSpec out;
    if (!spec.contains("kind")) throw ParseError(where + " is missing 'kind'");
    out.kind = spec["kind"].get<std::string>();
    if (spec.contains("world")) {
        out.world_choice = spec["world"].get<std::string>();
        if (out.world_choice != "base" && out.world_choice != "train") {
            throw ParseError(where + ".world must be 'base' or 'train'");
        }
    }
    out.temperature = number_or(spec, "temperature", 2.0, where);
    out.eps_good = number_or(spec, "eps_good", 0.02, where);
    out.eps_bad = number_or(spec, "eps_bad", 0.02, where);
    if (spec.contains("hidden")) out.train.hidden_sizes = int_array(spec["hidden"], where);
    out.train.epochs = static_cast<int>(number_or(spec, "epochs", 10.0, where));
    out.train.batch_size = static_cast<int>(number_or(spec, "batch_size", 128.0, where));
    out.train.learning_rate = number_or(spec, "learning_rate", 3e-3, where);
    out.train.l2 = number_or(spec, "l2", 0.0, where);

    const std::set<std::string> kinds{"analytic", "corrupted-analytic", "specialist-analytic",
                                      "trained-mlp"};
    if (kinds.find(out.kind) == kinds.end()) {
        throw ParseError(where + ": unknown model kind '" + out.kind + "'");
    }
    return out;
}

struct RuleSpec {
    std::string kind;
    std::optional<double> threshold;   // fixed-threshold operating point
    std::optional<std::string> model_path;  // pre-trained post-hoc model
};

struct ParsedConfig {
    std::string scenario;
    RngSeed seed = 1;
    json world_spec;
    ParsedTransforms transforms;
    std::vector<ModelSpec> models;
    std::vector<RuleSpec> rules;
    std::vector<PosthocTargetKind> posthoc_targets;
    PosthocHyperparams posthoc_hp;
    std::size_t train_samples = 20000;
    std::size_t test_samples = 20000;
    double validation_fraction = 0.2;
    std::string test_distribution = "clean";
    std::vector<double> rate_grid;
    std::vector<double> model_costs;
    std::vector<double> sweep_quantiles;
    std::filesystem::path output_dir;
    json normalized;  // the config as parsed, for the manifest
};

ParsedConfig parse_config(const json& doc) {
    check_keys(doc, {"scenario", "seed", "world", "transforms", "models", "rules", "posthoc",
                     "data", "evaluation", "output_dir"},
               "config");
    ParsedConfig cfg;
    if (!doc.contains("scenario")) throw ParseError("config is missing 'scenario'");
    cfg.scenario = doc["scenario"].get<std::string>();
    cfg.seed = static_cast<RngSeed>(number_or(doc, "seed", 1.0, "config"));
    if (!doc.contains("world")) throw ParseError("config is missing 'world'");
    cfg.world_spec = doc["world"];
    parse_world(cfg.world_spec);  // validate early
    if (doc.contains("transforms")) cfg.transforms = parse_transforms(doc["transforms"]);

    if (!doc.contains("models") || !doc["models"].is_array() || doc["models"].size() < 2) {
        throw ParseError("config needs a 'models' array with at least 2 entries");
    }
    for (std::size_t i = 0; i < doc["models"].size(); ++i) {
        cfg.models.push_back(parse_model(doc["models"][i], i));
    }

    if (!doc.contains("rules") || !doc["rules"].is_array() || doc["rules"].empty()) {
        throw ParseError("config needs a nonempty 'rules' array");
    }
    const std::set<std::string> known_rules{
        "confidence", "entropy",        "random",           "oracle-onehot", "oracle-prob",
        "oracle-relative", "bayes",     "posthoc-diff-01",  "posthoc-diff-prob",
        "posthoc-maxprob"};
    for (const auto& r : doc["rules"]) {
        RuleSpec spec;
        if (r.is_string()) {
            spec.kind = r.get<std::string>();
        } else {
            check_keys(r, {"kind", "threshold", "model_path"}, "rules[]");
            spec.kind = r.at("kind").get<std::string>();
            if (r.contains("threshold")) {
                spec.threshold = require_number(r, "threshold", "rules[]");
            }
            if (r.contains("model_path")) {
                spec.model_path = r.at("model_path").get<std::string>();
                if (spec.kind.rfind("posthoc-", 0) != 0) {
                    throw ParseError("rules[].model_path only applies to posthoc-* kinds");
                }
            }
        }
        if (known_rules.find(spec.kind) == known_rules.end()) {
            throw ParseError("unknown rule '" + spec.kind + "'");
        }
        cfg.rules.push_back(std::move(spec));
    }

    if (doc.contains("posthoc")) {
        const json& ph = doc["posthoc"];
        check_keys(ph, {"targets", "hidden", "epochs", "batch_size", "learning_rate", "l2"},
                   "posthoc");
        if (ph.contains("targets")) {
            for (const auto& t : ph["targets"]) {
                cfg.posthoc_targets.push_back(posthoc_target_from_string(t.get<std::string>()));
            }
        }
        if (ph.contains("hidden")) cfg.posthoc_hp.hidden_sizes = int_array(ph["hidden"], "posthoc");
        cfg.posthoc_hp.epochs = static_cast<int>(number_or(ph, "epochs", 20.0, "posthoc"));
        cfg.posthoc_hp.batch_size = static_cast<int>(number_or(ph, "batch_size", 128.0, "posthoc"));
        cfg.posthoc_hp.learning_rate = number_or(ph, "learning_rate", 7e-4, "posthoc");
        cfg.posthoc_hp.l2 = number_or(ph, "l2", 1e-3, "posthoc");
    }
    // any posthoc-* rule without a pre-trained model requires its target
    // to be trained in this run
    for (const auto& spec : cfg.rules) {
        if (spec.kind.rfind("posthoc-", 0) == 0 && !spec.model_path.has_value()) {
            const PosthocTargetKind kind = posthoc_target_from_string(spec.kind.substr(8));
            if (std::find(cfg.posthoc_targets.begin(), cfg.posthoc_targets.end(), kind) ==
                cfg.posthoc_targets.end()) {
                cfg.posthoc_targets.push_back(kind);
            }
        }
    }

    if (doc.contains("data")) {
        const json& data = doc["data"];
        check_keys(data, {"train_samples", "test_samples", "validation_fraction"}, "data");
        cfg.train_samples =
            static_cast<std::size_t>(number_or(data, "train_samples", 20000.0, "data"));
        cfg.test_samples =
            static_cast<std::size_t>(number_or(data, "test_samples", 20000.0, "data"));
        cfg.validation_fraction = number_or(data, "validation_fraction", 0.2, "data");
    }

    if (doc.contains("evaluation")) {
        const json& ev = doc["evaluation"];
        check_keys(ev, {"rate_grid", "model_costs", "test_distribution", "sweep_quantiles"},
                   "evaluation");
        if (ev.contains("rate_grid")) cfg.rate_grid = number_array(ev["rate_grid"], "rate_grid");
        if (ev.contains("model_costs")) {
            cfg.model_costs = number_array(ev["model_costs"], "model_costs");
        }
        if (ev.contains("sweep_quantiles")) {
            cfg.sweep_quantiles = number_array(ev["sweep_quantiles"], "sweep_quantiles");
        }
        if (ev.contains("test_distribution")) {
            cfg.test_distribution = ev["test_distribution"].get<std::string>();
            if (cfg.test_distribution != "clean" && cfg.test_distribution != "train") {
                throw ParseError("evaluation.test_distribution must be 'clean' or 'train'");
            }
        }
    }
    if (cfg.rate_grid.empty()) {
        for (int i = 0; i <= 20; ++i) cfg.rate_grid.push_back(static_cast<double>(i) / 20.0);
    }
    if (!std::is_sorted(cfg.rate_grid.begin(), cfg.rate_grid.end())) {
        throw ParseError("evaluation.rate_grid must be sorted");
    }
    if (cfg.model_costs.empty()) {
        double c = 1.0;
        for (std::size_t k = 0; k < cfg.models.size(); ++k, c *= 4.0) {
            cfg.model_costs.push_back(c);
        }
    }
    if (cfg.model_costs.size() != cfg.models.size()) {
        throw ParseError("evaluation.model_costs must have one entry per model");
    }

    if (doc.contains("output_dir")) {
        cfg.output_dir = doc["output_dir"].get<std::string>();
    } else {
        cfg.output_dir = std::filesystem::path("runs") / cfg.scenario;
    }
    cfg.normalized = doc;
    return cfg;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

struct BuiltScenario {
    std::shared_ptr<const SyntheticWorld> base_world;
    std::shared_ptr<const SyntheticWorld> train_world;
    std::vector<std::shared_ptr<const Classifier>> models;
    std::optional<Dataset> test_ds;
    std::optional<Dataset> posthoc_ds;  // held-out part of the training data
    std::map<PosthocTargetKind, std::vector<std::shared_ptr<const PosthocModel>>> posthoc;  // per stage
    std::map<PosthocTargetKind, PosthocTrainResult> posthoc_stage0;
};

BuiltScenario build_scenario(const ParsedConfig& cfg) {
    BuiltScenario built;
    built.base_world = parse_world(cfg.world_spec);
    built.train_world = built.base_world;
    if (cfg.transforms.long_tail.has_value()) {
        built.train_world = apply_long_tail(*built.base_world, *cfg.transforms.long_tail);
    }

    Dataset train_ds = built.train_world->sample(cfg.train_samples,
                                                 derive_seed(cfg.seed, kSeedTrainSample));
    if (cfg.transforms.label_noise.has_value()) {
        train_ds = apply_label_noise(train_ds, *cfg.transforms.label_noise,
                                     derive_seed(cfg.seed, kSeedTrainNoise));
    }
    auto [base_train, heldout] =
        validation_split(train_ds, cfg.validation_fraction, derive_seed(cfg.seed, kSeedSplit));
    built.posthoc_ds = heldout;

    for (std::size_t i = 0; i < cfg.models.size(); ++i) {
        const ModelSpec& spec = cfg.models[i];
        const auto world = spec.world_choice == "base" ? built.base_world : built.train_world;
        if (spec.kind == "analytic") {
            built.models.push_back(std::make_shared<AnalyticClassifier>(world));
        } else if (spec.kind == "corrupted-analytic") {
            built.models.push_back(
                std::make_shared<TemperatureClassifier>(world, spec.temperature));
        } else if (spec.kind == "specialist-analytic") {
            if (!cfg.transforms.specialist.has_value()) {
                throw ConfigError("specialist-analytic model needs a specialist-split transform");
            }
            built.models.push_back(std::make_shared<SpecialistClassifier>(
                world, make_specialist_world(world, *cfg.transforms.specialist), spec.eps_good,
                spec.eps_bad));
        } else {  // trained-mlp
            built.models.push_back(
                train_classifier(base_train, spec.train, derive_seed(cfg.seed, kSeedModelBase + i))
                    .classifier);
        }
    }

    if (cfg.test_distribution == "clean") {
        built.test_ds = built.base_world->sample(cfg.test_samples,
                                                 derive_seed(cfg.seed, kSeedTestSample));
    } else {
        Dataset test = built.train_world->sample(cfg.test_samples,
                                                 derive_seed(cfg.seed, kSeedTestSample));
        if (cfg.transforms.label_noise.has_value()) {
            test = apply_label_noise(test, *cfg.transforms.label_noise,
                                     derive_seed(cfg.seed, kSeedTestNoise));
        }
        built.test_ds = test;
    }

    // One post-hoc rule per (stage, target): stage k imitates the oracle
    // between models k and k+1 using stage-k probability features.
    for (std::size_t t = 0; t < cfg.posthoc_targets.size(); ++t) {
        const PosthocTargetKind kind = cfg.posthoc_targets[t];
        std::vector<std::shared_ptr<const PosthocModel>> per_stage;
        for (std::size_t stage = 0; stage + 1 < built.models.size(); ++stage) {
            const auto pairs = make_targets(*built.posthoc_ds, *built.models[stage],
                                            *built.models[stage + 1], kind);
            const auto monitor =
                make_targets(*built.test_ds, *built.models[stage], *built.models[stage + 1], kind);
            auto result = train_posthoc(pairs, cfg.posthoc_hp,
                                        derive_seed(cfg.seed, kSeedPosthocBase + 10 * stage + t),
                                        kind, built.test_ds->num_classes(), &monitor);
            per_stage.push_back(std::make_shared<PosthocModel>(result.model));
            if (stage == 0) built.posthoc_stage0.emplace(kind, std::move(result));
        }
        built.posthoc.emplace(kind, std::move(per_stage));
    }
    return built;
}

std::shared_ptr<const DeferralRule> build_rule(const RuleSpec& spec, const ParsedConfig& cfg,
                                               const BuiltScenario& built, std::size_t stage) {
    const std::string& name = spec.kind;
    if (name == "confidence") return make_confidence_rule();
    if (name == "entropy") return make_entropy_rule();
    if (name == "random") return make_random_rule(derive_seed(cfg.seed, kSeedRandomRule));
    if (name == "oracle-onehot") return make_onehot_oracle_rule();
    if (name == "oracle-prob") return make_prob_oracle_rule();
    if (name == "oracle-relative") return make_relative_confidence_rule();
    if (name == "bayes") return make_bayes_rule();
    if (name.rfind("posthoc-", 0) == 0) {
        const PosthocTargetKind kind = posthoc_target_from_string(name.substr(8));
        if (spec.model_path.has_value()) {
            auto loaded = std::make_shared<PosthocModel>(load_model(*spec.model_path));
            if (loaded->target_kind != kind) {
                throw ConfigError("model at " + *spec.model_path + " was trained for " +
                                  to_string(loaded->target_kind) + ", rule wants " +
                                  to_string(kind));
            }
            return make_posthoc_rule(std::move(loaded));
        }
        return make_posthoc_rule(built.posthoc.at(kind).at(stage));
    }
    throw ConfigError("unknown rule '" + name + "'");
}

/// Fixed-threshold operating point of a rule on the test set.
struct OperatingPoint {
    double deferral_rate = 0.0;
    double accuracy = 0.0;
};

OperatingPoint evaluate_operating_point(const Dataset& ds, const Classifier& m1,
                                        const Classifier& m2, const DeferralRule& rule,
                                        double threshold, const SyntheticWorld* world) {
    std::size_t deferred = 0, correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const LabeledExample& ex = ds[i];
        const ProbVector p1 = m1.predict_proba(ex.x);
        const ProbVector p2 = m2.predict_proba(ex.x);
        StageInputs in;
        in.p_current = &p1;
        in.example_id = i;
        ProbVector eta = p1;
        if (rule.needs_next_model()) in.p_next = &p2;
        if (rule.needs_label()) in.label = ex.y;
        if (rule.needs_posterior()) {
            if (world == nullptr) throw ConfigError("rule needs an analytic world");
            eta = world->posterior(ex.x);
            in.posterior = &eta;
        }
        const bool defer = rule.defers(in, threshold);
        deferred += defer ? 1 : 0;
        const int prediction = defer ? argmax_label(p2) : argmax_label(p1);
        correct += prediction == ex.y ? 1 : 0;
    }
    OperatingPoint pt;
    pt.deferral_rate = static_cast<double>(deferred) / static_cast<double>(ds.size());
    pt.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    return pt;
}

}  // namespace

ScenarioArtifacts run_scenario(const std::filesystem::path& config_path,
                               std::optional<std::filesystem::path> out_override,
                               std::optional<RngSeed> seed_override) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config: " + config_path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ParseError("config " + config_path.string() + ": " + e.what());
    }
    // a run manifest embeds the config it was produced from; accept it
    // directly so any run can be reproduced from its manifest
    if (doc.is_object() && doc.contains("config_hash") && doc.contains("config")) {
        doc = doc["config"];
    }
    if (seed_override.has_value()) doc["seed"] = *seed_override;
    ParsedConfig cfg = parse_config(doc);
    if (out_override.has_value()) cfg.output_dir = *out_override;

    BuiltScenario built = build_scenario(cfg);
    const Dataset& test = *built.test_ds;

    // The world whose posterior backs the bayes rule must describe the test
    // distribution exactly.
    const SyntheticWorld* eval_world =
        cfg.test_distribution == "clean" ? built.base_world.get() : built.train_world.get();
    const bool eta_valid = !(cfg.test_distribution == "train" &&
                             cfg.transforms.label_noise.has_value());

    std::ostringstream curves;
    curves << kCurveHeader << '\n';
    std::ostringstream operating;
    operating << kCurveHeader << '\n';
    bool have_operating_points = false;
    for (const auto& spec : cfg.rules) {
        const auto rule = build_rule(spec, cfg, built, 0);
        if (rule->needs_posterior() && !eta_valid) {
            throw ConfigError("bayes rule needs an analytic test distribution");
        }
        const DeferralCurve curve = deferral_curve(test, *built.models[0], *built.models[1], *rule,
                                                   cfg.rate_grid, eval_world);
        for (const auto& pt : curve.points) {
            curves << rule->name() << ',' << cfg.scenario << ',' << cfg.seed << ','
                   << format_double(pt.threshold) << ',' << format_double(pt.deferral_rate) << ','
                   << format_double(pt.accuracy) << ',' << format_double(pt.risk) << ','
                   << format_double(relative_inference_cost(pt.deferral_rate, cfg.model_costs[0],
                                                            cfg.model_costs[1]))
                   << '\n';
        }
        if (spec.threshold.has_value()) {
            const OperatingPoint pt = evaluate_operating_point(
                test, *built.models[0], *built.models[1], *rule, *spec.threshold, eval_world);
            operating << rule->name() << ',' << cfg.scenario << ',' << cfg.seed << ','
                      << format_double(*spec.threshold) << ','
                      << format_double(pt.deferral_rate) << ',' << format_double(pt.accuracy)
                      << ',' << format_double(1.0 - pt.accuracy) << ','
                      << format_double(relative_inference_cost(
                             pt.deferral_rate, cfg.model_costs[0], cfg.model_costs[1]))
                      << '\n';
            have_operating_points = true;
        }
    }

    std::ostringstream calibration;
    calibration << "bucket_lo,bucket_hi,count,mean_conf,event_freq\n";
    const CalibrationReport cal = calibration_report(test, *built.models[0], *built.models[1]);
    for (const auto& bucket : cal.buckets) {
        calibration << format_double(bucket.lo) << ',' << format_double(bucket.hi) << ','
                    << bucket.count << ',' << format_double(bucket.mean_confidence) << ','
                    << format_double(bucket.event_frequency) << '\n';
    }

    // Multi-model staged sweep: confidence staging vs post-hoc staging.
    std::ostringstream sweep;
    const bool do_sweep = built.models.size() > 2 && !cfg.sweep_quantiles.empty();
    if (do_sweep) {
        sweep << "strategy,quantile,accuracy,relative_cost\n";
        std::vector<std::pair<std::string, std::vector<std::shared_ptr<const DeferralRule>>>>
            strategies;
        std::vector<std::shared_ptr<const DeferralRule>> conf_rules;
        for (std::size_t k = 0; k + 1 < built.models.size(); ++k) {
            conf_rules.push_back(make_confidence_rule());
        }
        strategies.emplace_back("confidence", std::move(conf_rules));
        for (const auto& [kind, per_stage] : built.posthoc) {
            std::vector<std::shared_ptr<const DeferralRule>> rules;
            for (const auto& model : per_stage) rules.push_back(make_posthoc_rule(model));
            strategies.emplace_back("posthoc-" + to_string(kind), std::move(rules));
        }
        for (const auto& [label, rules] : strategies) {
            const auto points = staged_quantile_sweep(test, built.models, rules,
                                                      cfg.sweep_quantiles, cfg.model_costs);
            for (const auto& pt : points) {
                sweep << label << ',' << format_double(pt.quantile) << ','
                      << format_double(pt.accuracy) << ',' << format_double(pt.relative_cost)
                      << '\n';
            }
        }
    }

    // Post-hoc training curves (train and monitoring loss per epoch).
    std::ostringstream posthoc_curves;
    posthoc_curves << "target,epoch,train_loss,heldout_loss\n";
    for (const auto& [kind, result] : built.posthoc_stage0) {
        for (std::size_t e = 0; e < result.train_loss_curve.size(); ++e) {
            posthoc_curves << to_string(kind) << ',' << e << ','
                           << format_double(result.train_loss_curve[e]) << ','
                           << format_double(e < result.heldout_loss_curve.size()
                                                ? result.heldout_loss_curve[e]
                                                : std::numeric_limits<double>::quiet_NaN())
                           << '\n';
        }
    }

    // All computation done; only now touch the filesystem.
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output dir: " + cfg.output_dir.string());

    ScenarioArtifacts artifacts;
    artifacts.out_dir = cfg.output_dir;
    const auto write_file = [&](const std::string& name, const std::string& body) {
        std::ofstream out(cfg.output_dir / name, std::ios::binary);
        if (!out) throw IoError("cannot write " + (cfg.output_dir / name).string());
        out << body;
        if (!out) throw IoError("write failed: " + (cfg.output_dir / name).string());
        artifacts.files.push_back(name);
    };
    write_file("curves.csv", curves.str());
    write_file("calibration.csv", calibration.str());
    if (have_operating_points) write_file("operating_points.csv", operating.str());
    if (do_sweep) write_file("sweep.csv", sweep.str());
    if (!built.posthoc_stage0.empty()) write_file("posthoc_training.csv", posthoc_curves.str());
    for (const auto& [kind, per_stage] : built.posthoc) {
        for (std::size_t stage = 0; stage < per_stage.size(); ++stage) {
            const std::string name = per_stage.size() > 1
                                         ? "posthoc_" + to_string(kind) + "_stage" +
                                               std::to_string(stage + 1) + ".json"
                                         : "posthoc_" + to_string(kind) + ".json";
            save_model(*per_stage[stage], cfg.output_dir / name);
            artifacts.files.push_back(name);
        }
    }
    for (std::size_t k = 0; k < built.models.size(); ++k) {
        const std::string name = "model_" + std::to_string(k + 1) + ".json";
        save_classifier(*built.models[k], cfg.output_dir / name);
        artifacts.files.push_back(name);
    }

    json manifest;
    manifest["format_version"] = 1;
    manifest["tool_version"] = kToolVersion;
    manifest["scenario"] = cfg.scenario;
    manifest["seed"] = cfg.seed;
    manifest["config"] = cfg.normalized;
    manifest["config_hash"] = hex64(fnv1a64(cfg.normalized.dump()));
    manifest["artifacts"] = artifacts.files;
    write_file("manifest.json", manifest.dump(2) + "\n");
    return artifacts;
}

std::map<std::string, std::vector<CurvePoint>> load_curves_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCurveHeader) {
        throw ParseError("unexpected curve CSV header in " + path.string());
    }
    std::map<std::string, std::vector<CurvePoint>> curves;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string rule, scenario, seed, threshold, rate, accuracy, risk, cost;
        std::getline(fields, rule, ',');
        std::getline(fields, scenario, ',');
        std::getline(fields, seed, ',');
        std::getline(fields, threshold, ',');
        std::getline(fields, rate, ',');
        std::getline(fields, accuracy, ',');
        std::getline(fields, risk, ',');
        std::getline(fields, cost, ',');
        CurvePoint pt;
        try {
            pt.threshold = std::stod(threshold);
            pt.deferral_rate = std::stod(rate);
            pt.accuracy = std::stod(accuracy);
            pt.risk = std::stod(risk);
        } catch (const std::exception&) {
            throw ParseError("bad numeric field in " + path.string());
        }
        curves[rule].push_back(pt);
    }
    return curves;
}

std::string compare_report(const std::filesystem::path& manifest_a,
                           const std::filesystem::path& manifest_b) {
    const auto load = [](const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open manifest: " + path.string());
        json doc;
        try {
            in >> doc;
        } catch (const json::parse_error& e) {
            throw ParseError("manifest " + path.string() + ": " + e.what());
        }
        return doc;
    };
    const json a = load(manifest_a);
    const json b = load(manifest_b);
    const std::string scenario_a = a.at("scenario").get<std::string>();
    const std::string scenario_b = b.at("scenario").get<std::string>();
    if (scenario_a != scenario_b) {
        throw ConfigError("manifests describe different scenarios: '" + scenario_a + "' vs '" +
                          scenario_b + "'");
    }
    const auto curves_a = load_curves_csv(manifest_a.parent_path() / "curves.csv");
    const auto curves_b = load_curves_csv(manifest_b.parent_path() / "curves.csv");

    const auto accuracy_at = [](const std::vector<CurvePoint>& points, double rate) {
        double best = 0.0, best_gap = 2.0;
        for (const auto& pt : points) {
            const double gap = std::abs(pt.deferral_rate - rate);
            if (gap < best_gap) {
                best_gap = gap;
                best = pt.accuracy;
            }
        }
        return best;
    };

    std::ostringstream out;
    out << "scenario: " << scenario_a << "\n";
    out << "rule,rate,accuracy_a,accuracy_b,delta\n";
    for (const auto& [rule, points_a] : curves_a) {
        const auto it = curves_b.find(rule);
        if (it == curves_b.end()) continue;
        for (double rate : {0.1, 0.3, 0.5}) {
            const double acc_a = accuracy_at(points_a, rate);
            const double acc_b = accuracy_at(it->second, rate);
            out << rule << ',' << format_double(rate) << ',' << format_double(acc_a) << ','
                << format_double(acc_b) << ',' << format_double(acc_b - acc_a) << '\n';
        }
    }
    return out.str();
}

}  // namespace cascadelab
