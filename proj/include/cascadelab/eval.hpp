#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cascadelab/dataset.hpp"
#include "cascadelab/deferral.hpp"
#include "cascadelab/models.hpp"
#include "cascadelab/worlds.hpp"

namespace cascadelab {

/// Pairwise (fixed binary tree) summation: bit-stable regardless of how the
/// per-element work was parallelized.
double pairwise_sum(const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Two-model risk

/// Empirical cascade risk on a dataset: mean of
/// 1[y != h1] 1[keep] + 1[y != h2] 1[defer] + cost 1[defer].
/// `world` supplies the posterior when the rule needs it.
double cascade_risk(const Dataset& ds, const Classifier& model1, const Classifier& model2,
                    const DeferralRule& rule, double threshold, double cost,
                    const SyntheticWorld* world = nullptr);

/// Exact-expectation risk on a finite-support world. Label-dependent rules
/// are integrated over y | x.
double cascade_risk_exact(const DiscreteWorld& world, const Classifier& model1,
                          const Classifier& model2, const DeferralRule& rule, double threshold,
                          double cost);

/// Exact risk of an arbitrary defer-set over the support (the decision for
/// support point i is defers(i)).
double defer_set_risk_exact(const DiscreteWorld& world, const Classifier& model1,
                            const Classifier& model2, const std::function<bool(std::size_t)>& defers,
                            double cost);

/// Exact excess risk over the optimal rule at cost c:
/// E_x[(1[defer] - 1[alpha < 0]) * alpha(x)], alpha = eta_h1 - eta_h2 + c.
/// Defined for label-independent rules on analytic worlds.
double excess_risk(const DiscreteWorld& world, const Classifier& model1, const Classifier& model2,
                   const std::function<bool(std::size_t)>& defers, double cost);
double excess_risk(const DiscreteWorld& world, const Classifier& model1, const Classifier& model2,
                   const DeferralRule& rule, double threshold, double cost);

// ---------------------------------------------------------------------------
// Deferral curves

struct CurvePoint {
    double deferral_rate = 0.0;
    double accuracy = 0.0;
    double risk = 0.0;       // at deferral cost 0, i.e. 1 - accuracy
    double threshold = 0.0;  // score-scale quantile threshold
};

struct DeferralCurve {
    std::vector<CurvePoint> points;
    std::string rule;
    std::string scenario;
    std::uint64_t seed = 0;
};

/// Quantile-matched empirical curve: for each target rate, defer the
/// examples with the top round(rate*n) scores (ties broken by example
/// order) and measure accuracy under the induced routing.
DeferralCurve deferral_curve(const Dataset& ds, const Classifier& model1,
                             const Classifier& model2, const DeferralRule& rule,
                             const std::vector<double>& rate_grid,
                             const SyntheticWorld* world = nullptr);

/// Exact-expectation curve on a finite-support world: support points are
/// deferred in score order (stable ties) until the accumulated marginal
/// mass reaches each target rate; accuracy is the exact expectation of
/// correctness under the routing. Label-independent rules only.
DeferralCurve deferral_curve_exact(const DiscreteWorld& world, const Classifier& model1,
                                   const Classifier& model2, const DeferralRule& rule,
                                   const std::vector<double>& rate_grid);

// ---------------------------------------------------------------------------
// Accuracy identity

/// Exact check of the accuracy decomposition
/// A(r) = Pr(h1 correct) + E[r(x) beta(x)], beta = eta_h2 - eta_h1:
/// two rules give equal cascade accuracy exactly when their E[r beta] agree.
struct AccuracyIdentityReport {
    double expectation_a = 0.0;  // E[r_A beta]
    double expectation_b = 0.0;
    double accuracy_a = 0.0;
    double accuracy_b = 0.0;
    double expectation_residual = 0.0;
    double accuracy_residual = 0.0;
    bool consistent = false;  // equality of one pair implies equality of the other
};

AccuracyIdentityReport accuracy_identity_check(const DiscreteWorld& world,
                                               const Classifier& model1, const Classifier& model2,
                                               const std::function<bool(std::size_t)>& defers_a,
                                               const std::function<bool(std::size_t)>& defers_b,
                                               double tolerance = 1e-12);

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationBucket {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double event_frequency = 0.0;  // h1 wrong and h2 right
};

struct CalibrationReport {
    std::array<CalibrationBucket, 10> buckets;
};

/// Buckets examples by max p1 into ten uniform bins over [0, 1] and
/// reports the empirical frequency of {h1(x) != y and h2(x) = y} per bin.
CalibrationReport calibration_report(const Dataset& ds, const Classifier& model1,
                                     const Classifier& model2);

// ---------------------------------------------------------------------------
// Brute-force oracles

struct EnumeratedRule {
    std::vector<bool> defer_set;  // per support point
    double risk = 0.0;
};

/// Exhaustive minimization of the two-model risk over all 2^|support|
/// defer-sets. Refuses supports larger than 12 points.
EnumeratedRule enumerate_optimal_rule(const DiscreteWorld& world, const Classifier& model1,
                                      const Classifier& model2, double cost);

struct EnumeratedSelector {
    std::vector<int> assignment;  // model index per support point
    double risk = 0.0;
};

/// Exhaustive minimization of the K-model selector risk
/// sum_x Pr(x) [(1 - eta_{h_s(x)}(x)) + cost_{s(x)}] over all K^|support|
/// selectors. Refuses supports larger than 8 points.
EnumeratedSelector enumerate_optimal_selector(
    const DiscreteWorld& world, const std::vector<std::shared_ptr<const Classifier>>& classifiers,
    const std::vector<double>& costs);

/// Exact risk of the pointwise-optimal selector (argmin of error
/// probability plus cost at every support point).
double optimal_selector_risk_exact(const DiscreteWorld& world,
                                   const std::vector<std::shared_ptr<const Classifier>>& classifiers,
                                   const std::vector<double>& costs);

// ---------------------------------------------------------------------------
// Inference cost

/// Mean summed cost of the invoked models divided by the last (largest)
/// model's cost.
double relative_inference_cost(const std::vector<CascadeResult>& results,
                               const std::vector<double>& model_costs);

/// Two-model closed form at a given deferral rate: model 1 always runs,
/// model 2 runs on the deferred fraction.
double relative_inference_cost(double deferral_rate, double cost1, double cost2);

// ---------------------------------------------------------------------------
// Multi-stage sweep

struct SweepPoint {
    double quantile = 0.0;
    std::vector<double> thresholds;  // score-scale per stage
    double accuracy = 0.0;
    double relative_cost = 0.0;
    std::vector<double> exit_fractions;  // per model
};

/// Shared-quantile threshold sweep for a K-model cascade: at quantile q,
/// stage k's threshold is set so the top q fraction of stage-k scores
/// (computed over the whole dataset) defer. Stage rules must be usable in
/// sequence; oracle rules are evaluated in analysis mode.
std::vector<SweepPoint> staged_quantile_sweep(
    const Dataset& ds, const std::vector<std::shared_ptr<const Classifier>>& classifiers,
    const std::vector<std::shared_ptr<const DeferralRule>>& rules,
    const std::vector<double>& quantile_grid, const std::vector<double>& model_costs,
    const SyntheticWorld* world = nullptr);

}  // namespace cascadelab
