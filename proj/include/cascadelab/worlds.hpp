#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "cascadelab/dataset.hpp"
#include "cascadelab/prob.hpp"
#include "cascadelab/rng.hpp"

namespace cascadelab {

/// A joint distribution over (x, y) whose posterior Pr(y|x) is known in
/// closed form. Worlds are immutable after construction.
class SyntheticWorld {
public:
    virtual ~SyntheticWorld() = default;

    virtual int num_classes() const = 0;
    virtual std::size_t dim() const = 0;

    /// Exact posterior at x. For discrete worlds x must be a support point.
    virtual ProbVector posterior(const std::vector<double>& x) const = 0;

    /// n i.i.d. draws: x from the instance marginal, then y ~ posterior(x).
    /// Deterministic given the seed.
    Dataset sample(std::size_t n, RngSeed seed) const;

    /// Marginal class distribution Pr(y).
    virtual ProbVector class_marginals() const = 0;

    virtual const class DiscreteWorld* as_discrete() const { return nullptr; }

protected:
    virtual std::vector<double> sample_instance(Rng& rng) const = 0;
};

/// Finite-support world: every expectation is an exact finite sum.
class DiscreteWorld : public SyntheticWorld {
public:
    struct SupportPoint {
        std::vector<double> x;
        double prob;
        ProbVector posterior;
    };

    explicit DiscreteWorld(std::vector<SupportPoint> support);

    int num_classes() const override { return num_classes_; }
    std::size_t dim() const override { return support_.front().x.size(); }
    ProbVector posterior(const std::vector<double>& x) const override;
    ProbVector class_marginals() const override;
    const DiscreteWorld* as_discrete() const override { return this; }

    const std::vector<SupportPoint>& support() const { return support_; }
    std::size_t support_size() const { return support_.size(); }

protected:
    std::vector<double> sample_instance(Rng& rng) const override;

private:
    std::vector<SupportPoint> support_;
    int num_classes_;
};

/// Mixture of isotropic gaussians, one component per class; the posterior
/// follows from Bayes' rule on the class-conditional densities.
class GaussianMixtureWorld : public SyntheticWorld {
public:
    struct Component {
        std::vector<double> mean;
        double stddev;
        double prior;
    };

    explicit GaussianMixtureWorld(std::vector<Component> components);

    int num_classes() const override { return static_cast<int>(components_.size()); }
    std::size_t dim() const override { return components_.front().mean.size(); }
    ProbVector posterior(const std::vector<double>& x) const override;
    ProbVector class_marginals() const override;

    const std::vector<Component>& components() const { return components_; }

protected:
    std::vector<double> sample_instance(Rng& rng) const override;

private:
    std::vector<Component> components_;
};

// ---------------------------------------------------------------------------
// Scenario transforms

/// Labels of examples whose class is in `noisy_classes` are redrawn
/// uniformly over all L classes with probability `flip_prob` (the original
/// label can be redrawn).
struct LabelNoiseTransform {
    std::vector<int> noisy_classes;
    double flip_prob = 1.0;
};

/// Marks the sub-group of classes where a downstream specialist performs
/// well. Must be a nonempty proper subset of [0, L).
struct SpecialistSplitTransform {
    std::vector<int> good_classes;
};

/// Reweights class priors head:tail; the first `head_classes` classes get
/// `head_weight`, the rest `tail_weight`, then priors renormalize.
/// Class-conditional densities are unchanged.
struct LongTailTransform {
    int head_classes = 0;
    double head_weight = 10.0;
    double tail_weight = 1.0;
};

using ScenarioTransform =
    std::variant<LabelNoiseTransform, SpecialistSplitTransform, LongTailTransform>;

Dataset apply_label_noise(const Dataset& ds, const LabelNoiseTransform& t, RngSeed seed);

/// Instance-level membership test for the specialist's good sub-group:
/// x is good when the world's most probable class at x is a good class.
class SubgroupPredicate {
public:
    SubgroupPredicate(std::shared_ptr<const SyntheticWorld> world, std::vector<bool> good_mask)
        : world_(std::move(world)), good_mask_(std::move(good_mask)) {}

    bool operator()(const std::vector<double>& x) const {
        return good_mask_[static_cast<std::size_t>(argmax_label(world_->posterior(x)))];
    }
    bool is_good_class(int c) const { return good_mask_[static_cast<std::size_t>(c)]; }
    const std::vector<bool>& good_mask() const { return good_mask_; }

private:
    std::shared_ptr<const SyntheticWorld> world_;
    std::vector<bool> good_mask_;
};

/// The data distribution itself is unchanged; only the sub-group marking is
/// produced. Classifier construction consumes the predicate.
SubgroupPredicate make_specialist_world(std::shared_ptr<const SyntheticWorld> base,
                                        const SpecialistSplitTransform& t);

std::shared_ptr<const SyntheticWorld> apply_long_tail(const SyntheticWorld& world,
                                                      const LongTailTransform& t);

}  // namespace cascadelab
