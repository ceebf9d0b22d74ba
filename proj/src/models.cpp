#include "cascadelab/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cascadelab {

ProbVector softmax(const std::vector<double>& logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> exps(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) exps[i] = std::exp(logits[i] - peak);
    return normalize(exps);
}

// ---------------------------------------------------------------------------
// TemperatureClassifier

TemperatureClassifier::TemperatureClassifier(std::shared_ptr<const SyntheticWorld> world,
                                             double temperature)
    : world_(std::move(world)), temperature_(temperature) {
    if (!(temperature_ > 0.0)) throw ConfigError("temperature must be > 0");
}

ProbVector TemperatureClassifier::predict_proba(const std::vector<double>& x) const {
    const ProbVector eta = world_->posterior(x);
    std::vector<double> raw(eta.num_classes());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = std::pow(eta[i], temperature_);
    }
    return normalize(raw);
}

// ---------------------------------------------------------------------------
// SpecialistClassifier

SpecialistClassifier::SpecialistClassifier(std::shared_ptr<const SyntheticWorld> world,
                                           SubgroupPredicate subgroup, double eps_good,
                                           double eps_bad)
    : world_(std::move(world)),
      subgroup_(std::move(subgroup)),
      eps_good_(eps_good),
      eps_bad_(eps_bad) {
    const double L = static_cast<double>(world_->num_classes());
    if (!(eps_good_ > 0.0 && eps_good_ < 1.0)) throw ConfigError("eps_good must be in (0,1)");
    if (!(eps_bad_ > 0.0 && 1.0 / L + 2.0 * eps_bad_ < 1.0)) {
        throw ConfigError("eps_bad too large for this class count");
    }
}

ProbVector SpecialistClassifier::predict_proba(const std::vector<double>& x) const {
    const int L = world_->num_classes();
    const int bayes_class = argmax_label(world_->posterior(x));
    std::vector<double> p(static_cast<std::size_t>(L));
    if (subgroup_(x)) {
        std::fill(p.begin(), p.end(), eps_good_ / static_cast<double>(L - 1));
        p[static_cast<std::size_t>(bayes_class)] = 1.0 - eps_good_;
    } else {
        // Peak class drawn from a hash of the instance: uniform over [0, L)
        // across the bad region, so the group accuracy is chance level.
        const int peak = static_cast<int>(hash_features(x) % static_cast<std::uint64_t>(L));
        const double inv_l = 1.0 / static_cast<double>(L);
        double assigned = inv_l + 2.0 * eps_bad_;
        p[static_cast<std::size_t>(peak)] = assigned;
        if (peak != bayes_class) {
            p[static_cast<std::size_t>(bayes_class)] = inv_l + eps_bad_;
            assigned += inv_l + eps_bad_;
        }
        const int rest = L - (peak != bayes_class ? 2 : 1);
        const double fill = (1.0 - assigned) / static_cast<double>(rest);
        for (int c = 0; c < L; ++c) {
            if (c != peak && c != bayes_class) p[static_cast<std::size_t>(c)] = fill;
        }
    }
    return normalize(p);
}

// ---------------------------------------------------------------------------
// MlpClassifier

MlpClassifier::MlpClassifier(MlpModel model, int num_classes)
    : model_(std::move(model)), num_classes_(num_classes) {
    if (model_.output_dim() != num_classes_) {
        throw ShapeError("MLP output dim " + std::to_string(model_.output_dim()) +
                         " != class count " + std::to_string(num_classes_));
    }
}

ProbVector MlpClassifier::predict_proba(const std::vector<double>& x) const {
    return softmax(mlp_forward(model_, x));
}

// ---------------------------------------------------------------------------
// Training

TrainedClassifier train_classifier(const Dataset& ds, const TrainHyperparams& hp, RngSeed seed) {
    const int L = ds.num_classes();
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(ds.feature_dim()));
    for (int h : hp.hidden_sizes) sizes.push_back(h);
    sizes.push_back(L);

    MlpModel model = init_mlp(sizes, derive_seed(seed, 0));
    AdamConfig adam;
    adam.learning_rate = hp.learning_rate;
    adam.l2 = hp.l2;
    OptimizerState opt = make_adam_state(model, adam);
    MlpGradients grads = make_gradients(model);
    MlpForwardCache cache;

    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainedClassifier result;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(hp.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(hp.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            grads.set_zero();
            for (std::size_t i = start; i < end; ++i) {
                const LabeledExample& ex = ds[order[i]];
                const std::vector<double> logits = mlp_forward_cached(model, ex.x, cache);
                const ProbVector probs = softmax(logits);
                const double p_true = probs[static_cast<std::size_t>(ex.y)];
                epoch_loss -= std::log(std::max(p_true, 1e-300));
                std::vector<double> grad_logits(probs.values());
                grad_logits[static_cast<std::size_t>(ex.y)] -= 1.0;
                for (double& g : grad_logits) g *= inv_batch;
                mlp_backward(model, cache, grad_logits, grads);
            }
            adam_step(opt, model, grads);
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw TrainingDivergenceError("classifier training loss diverged at epoch " +
                                          std::to_string(epoch));
        }
        result.loss_curve.push_back(epoch_loss);
    }

    auto clf = std::make_shared<MlpClassifier>(std::move(model), L);
    std::size_t correct = 0;
    for (const auto& ex : ds) {
        if (clf->predict(ex.x) == ex.y) ++correct;
    }
    result.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    result.classifier = std::move(clf);
    return result;
}

}  // namespace cascadelab
