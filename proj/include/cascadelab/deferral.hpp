#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cascadelab/models.hpp"
#include "cascadelab/posthoc.hpp"
#include "cascadelab/prob.hpp"
#include "cascadelab/worlds.hpp"

namespace cascadelab {

// Deferral scores follow one convention: a larger score is stronger
// evidence for invoking the next model. Decisions are strict
// comparisons, so a score exactly at the threshold keeps the current
// model.

/// -max_y' p1_y'. The deferral decision at probability threshold c is
/// max p1 < c.
double score_confidence(const ProbVector& p1);

/// Entropy of p1; defer when it exceeds the threshold.
double score_entropy(const ProbVector& p1);

/// eta_{h2} - eta_{h1}: the exact gain in correctness probability from
/// using model 2. Defer when it exceeds the deferral cost.
double score_bayes(const ProbVector& eta, int h1, int h2);

/// 1[y == h2] - 1[y == h1], in {-1, 0, 1}.
double score_onehot_oracle(int y, int h1, int h2);

/// p2_y - p1_y: label-dependent correctness gain.
double score_prob_oracle(const ProbVector& p1, const ProbVector& p2, int y);

/// max p2 - max p1: relative confidence of the two models.
double score_relative_confidence(const ProbVector& p1, const ProbVector& p2);

/// Trained rule score: g(v(p1)) for diff-01 and diff-prob targets,
/// g(v(p1)) - max p1 for maxprob.
double score_posthoc(const PosthocModel& g, const ProbVector& p1);

enum class RuleKind {
    kConfidence,
    kEntropy,
    kRandom,
    kOracleOneHot,
    kOracleProb,
    kOracleRelative,
    kBayes,
    kPosthoc,
};

std::string to_string(RuleKind kind);

/// Inputs a rule may read at one cascade stage. Production rules see only
/// the current model's output; oracle inputs are populated in analysis
/// mode only.
struct StageInputs {
    const ProbVector* p_current = nullptr;
    const ProbVector* p_next = nullptr;
    const ProbVector* posterior = nullptr;
    std::optional<int> label;
    std::uint64_t example_id = 0;
};

class DeferralRule {
public:
    virtual ~DeferralRule() = default;

    virtual RuleKind kind() const = 0;
    virtual std::string name() const { return to_string(kind()); }
    virtual double score(const StageInputs& in) const = 0;

    /// Defer decision at a threshold. Default: score > threshold. The
    /// confidence rule keeps the classic probability-scale convention
    /// (defer when max p < threshold), which is the same decision.
    virtual bool defers(const StageInputs& in, double threshold) const {
        return score(in) > threshold;
    }

    virtual bool needs_next_model() const { return false; }
    virtual bool needs_label() const { return false; }
    virtual bool needs_posterior() const { return false; }
};

std::shared_ptr<DeferralRule> make_confidence_rule();
std::shared_ptr<DeferralRule> make_entropy_rule();
/// Per-example uniform score derived from (seed, example_id); thresholding
/// at c defers a uniformly random (1-c) fraction, i.e. Bernoulli deferral.
std::shared_ptr<DeferralRule> make_random_rule(RngSeed seed);
std::shared_ptr<DeferralRule> make_onehot_oracle_rule();
std::shared_ptr<DeferralRule> make_prob_oracle_rule();
std::shared_ptr<DeferralRule> make_relative_confidence_rule();
std::shared_ptr<DeferralRule> make_bayes_rule();
std::shared_ptr<DeferralRule> make_posthoc_rule(std::shared_ptr<const PosthocModel> model);

/// Analysis mode permits label- and next-model-dependent rules (they
/// cannot run in deployment, where only already-computed outputs exist).
enum class CascadeMode { kDeployment, kAnalysis };

struct CascadeConfig {
    std::vector<std::shared_ptr<const Classifier>> classifiers;  // K >= 2
    std::vector<std::shared_ptr<const DeferralRule>> rules;      // K - 1
    std::vector<double> thresholds;                              // K - 1
    std::vector<double> decision_costs;  // optional; K nondecreasing values, first 0
    CascadeMode mode = CascadeMode::kDeployment;

    void validate() const;
};

/// Extra inputs for analysis-mode rules.
struct AnalysisContext {
    const SyntheticWorld* world = nullptr;
    std::optional<int> label;
};

struct CascadeResult {
    int prediction = -1;
    int exit_index = 0;           // 1-based index of the model that predicted
    std::vector<bool> invoked;    // which models actually ran
};

/// Sequential execution: stage k keeps (emits model k's argmax) or defers
/// per rule k; model K is the fallback. Models are invoked lazily, so a
/// keep decision at stage k never touches models k+1..K in deployment mode.
CascadeResult run_cascade(const CascadeConfig& cfg, const std::vector<double>& x,
                          std::uint64_t example_id = 0, const AnalysisContext* ctx = nullptr);

/// argmin_k error_probs[k] + costs[k]; ties resolve to the lowest index.
int optimal_selector(const std::vector<double>& error_probs, const std::vector<double>& costs);

}  // namespace cascadelab
