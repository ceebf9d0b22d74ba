#pragma once

#include <memory>
#include <vector>

#include "cascadelab/mlp.hpp"
#include "cascadelab/prob.hpp"
#include "cascadelab/worlds.hpp"

namespace cascadelab {

/// A probabilistic classifier. Implementations are deterministic (same
/// input, same output) and safe for concurrent const calls.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual ProbVector predict_proba(const std::vector<double>& x) const = 0;
    virtual int num_classes() const = 0;

    int predict(const std::vector<double>& x) const { return argmax_label(predict_proba(x)); }
};

/// Emits the world posterior exactly.
class AnalyticClassifier : public Classifier {
public:
    explicit AnalyticClassifier(std::shared_ptr<const SyntheticWorld> world)
        : world_(std::move(world)) {}

    ProbVector predict_proba(const std::vector<double>& x) const override {
        return world_->posterior(x);
    }
    int num_classes() const override { return world_->num_classes(); }
    const std::shared_ptr<const SyntheticWorld>& world() const { return world_; }

private:
    std::shared_ptr<const SyntheticWorld> world_;
};

/// Posterior pushed through a temperature transform p^tau / sum(p^tau).
/// tau = 1 is the identity; any tau > 0 preserves the argmax.
class TemperatureClassifier : public Classifier {
public:
    TemperatureClassifier(std::shared_ptr<const SyntheticWorld> world, double temperature);

    ProbVector predict_proba(const std::vector<double>& x) const override;
    int num_classes() const override { return world_->num_classes(); }
    double temperature() const { return temperature_; }
    const std::shared_ptr<const SyntheticWorld>& world() const { return world_; }

private:
    std::shared_ptr<const SyntheticWorld> world_;
    double temperature_;
};

/// A downstream model that is near-perfect on the good sub-group and near
/// chance elsewhere.
///
/// On good instances (world's top class in the good set) it concentrates
/// mass 1 - eps_good on that class. On bad instances it emits a
/// near-uniform vector: the world's top class keeps mass 1/L + eps_bad
/// while the peak, 1/L + 2*eps_bad, sits on a class chosen by a
/// deterministic hash of x, so measured accuracy on the bad group stays at
/// chance level.
class SpecialistClassifier : public Classifier {
public:
    SpecialistClassifier(std::shared_ptr<const SyntheticWorld> world, SubgroupPredicate subgroup,
                         double eps_good = 0.02, double eps_bad = 0.02);

    ProbVector predict_proba(const std::vector<double>& x) const override;
    int num_classes() const override { return world_->num_classes(); }
    const std::shared_ptr<const SyntheticWorld>& world() const { return world_; }
    const SubgroupPredicate& subgroup() const { return subgroup_; }
    double eps_good() const { return eps_good_; }
    double eps_bad() const { return eps_bad_; }

private:
    std::shared_ptr<const SyntheticWorld> world_;
    SubgroupPredicate subgroup_;
    double eps_good_;
    double eps_bad_;
};

/// Softmax over a trained network's raw scores.
class MlpClassifier : public Classifier {
public:
    MlpClassifier(MlpModel model, int num_classes);

    ProbVector predict_proba(const std::vector<double>& x) const override;
    int num_classes() const override { return num_classes_; }
    const MlpModel& model() const { return model_; }

private:
    MlpModel model_;
    int num_classes_;
};

struct TrainHyperparams {
    std::vector<int> hidden_sizes{32};
    int epochs = 10;
    int batch_size = 128;
    double learning_rate = 3e-3;
    double l2 = 0.0;
};

struct TrainedClassifier {
    std::shared_ptr<MlpClassifier> classifier;
    double final_train_accuracy = 0.0;
    std::vector<double> loss_curve;  // mean cross-entropy per epoch
};

/// Softmax cross-entropy training with Adam; per-epoch Fisher-Yates
/// shuffling from seeds derived off `seed`. Zero epochs returns the
/// initialized model unchanged.
TrainedClassifier train_classifier(const Dataset& ds, const TrainHyperparams& hp, RngSeed seed);

/// Softmax of raw scores, computed stably.
ProbVector softmax(const std::vector<double>& logits);

}  // namespace cascadelab
