#include "cascadelab/deferral.hpp"

#include <algorithm>
#include <cmath>

namespace cascadelab {

double score_confidence(const ProbVector& p1) {
    return -p1[static_cast<std::size_t>(argmax_label(p1))];
}

double score_entropy(const ProbVector& p1) { return entropy(p1); }

double score_bayes(const ProbVector& eta, int h1, int h2) {
    return eta[static_cast<std::size_t>(h2)] - eta[static_cast<std::size_t>(h1)];
}

double score_onehot_oracle(int y, int h1, int h2) {
    return (y == h2 ? 1.0 : 0.0) - (y == h1 ? 1.0 : 0.0);
}

double score_prob_oracle(const ProbVector& p1, const ProbVector& p2, int y) {
    return p2[static_cast<std::size_t>(y)] - p1[static_cast<std::size_t>(y)];
}

double score_relative_confidence(const ProbVector& p1, const ProbVector& p2) {
    return p2[static_cast<std::size_t>(argmax_label(p2))] -
           p1[static_cast<std::size_t>(argmax_label(p1))];
}

double score_posthoc(const PosthocModel& g, const ProbVector& p1) {
    if (g.num_classes != static_cast<int>(p1.num_classes())) {
        throw ShapeError("post-hoc model trained for L = " + std::to_string(g.num_classes) +
                         ", got probabilities over " + std::to_string(p1.num_classes()));
    }
    const double raw = g.predict(extract_features(p1));
    if (g.target_kind == PosthocTargetKind::kMaxProb) {
        return raw - p1[static_cast<std::size_t>(argmax_label(p1))];
    }
    return raw;
}

std::string to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::kConfidence: return "confidence";
        case RuleKind::kEntropy: return "entropy";
        case RuleKind::kRandom: return "random";
        case RuleKind::kOracleOneHot: return "oracle-onehot";
        case RuleKind::kOracleProb: return "oracle-prob";
        case RuleKind::kOracleRelative: return "oracle-relative";
        case RuleKind::kBayes: return "bayes";
        case RuleKind::kPosthoc: return "posthoc";
    }
    throw ConfigError("unknown rule kind");
}

namespace {

const ProbVector& require_current(const StageInputs& in) {
    if (in.p_current == nullptr) throw ConfigError("rule needs the current model's output");
    return *in.p_current;
}

const ProbVector& require_next(const StageInputs& in) {
    if (in.p_next == nullptr) {
        throw ConfigError("rule needs the next model's output (analysis mode only)");
    }
    return *in.p_next;
}

class ConfidenceRule final : public DeferralRule {
public:
    RuleKind kind() const override { return RuleKind::kConfidence; }
    double score(const StageInputs& in) const override {
        return score_confidence(require_current(in));
    }
    bool defers(const StageInputs& in, double threshold) const override {
        return score(in) > -threshold;  // max p < threshold
    }
};

class EntropyRule final : public DeferralRule {
public:
    RuleKind kind() const override { return RuleKind::kEntropy; }
    double score(const StageInputs& in) const override {
        return score_entropy(require_current(in));
    }
};

class RandomRule final : public DeferralRule {
public:
    explicit RandomRule(RngSeed seed) : seed_(seed) {}
    RuleKind kind() const override { return RuleKind::kRandom; }
    double score(const StageInputs& in) const override {
        Rng rng(derive_seed(seed_, in.example_id));
        return rng.next_double();
    }

private:
    RngSeed seed_;
};

class OneHotOracleRule final : public DeferralRule {
public:
    RuleKind kind() const override { return RuleKind::kOracleOneHot; }
    double score(const StageInputs& in) const override {
        if (!in.label.has_value()) throw ConfigError("one-hot oracle needs the true label");
        const int h1 = argmax_label(require_current(in));
        const int h2 = argmax_label(require_next(in));
        return score_onehot_oracle(*in.label, h1, h2);
    }
    bool needs_next_model() const override { return true; }
    bool needs_label() const override { return true; }
};

class ProbOracleRule final : public DeferralRule {
public:
    RuleKind kind() const override { return RuleKind::kOracleProb; }
    double score(const StageInputs& in) const override {
        if (!in.label.has_value()) throw ConfigError("probability oracle needs the true label");
        return score_prob_oracle(require_current(in), require_next(in), *in.label);
    }
    bool needs_next_model() const override { return true; }
    bool needs_label() const override { return true; }
};

class RelativeConfidenceRule final : public DeferralRule {
public:
    RuleKind kind() const override { return RuleKind::kOracleRelative; }
    double score(const StageInputs& in) const override {
        return score_relative_confidence(require_current(in), require_next(in));
    }
    bool needs_next_model() const override { return true; }
};

class BayesRule final : public DeferralRule {
public:
    RuleKind kind() const override { return RuleKind::kBayes; }
    double score(const StageInputs& in) const override {
        if (in.posterior == nullptr) throw ConfigError("bayes rule needs the world posterior");
        const int h1 = argmax_label(require_current(in));
        const int h2 = argmax_label(require_next(in));
        return score_bayes(*in.posterior, h1, h2);
    }
    bool needs_next_model() const override { return true; }
    bool needs_posterior() const override { return true; }
};

class PosthocRule final : public DeferralRule {
public:
    explicit PosthocRule(std::shared_ptr<const PosthocModel> model) : model_(std::move(model)) {
        if (model_ == nullptr) throw ConfigError("post-hoc rule needs a trained model");
    }
    RuleKind kind() const override { return RuleKind::kPosthoc; }
    std::string name() const override { return "posthoc-" + to_string(model_->target_kind); }
    double score(const StageInputs& in) const override {
        return score_posthoc(*model_, require_current(in));
    }

private:
    std::shared_ptr<const PosthocModel> model_;
};

}  // namespace

std::shared_ptr<DeferralRule> make_confidence_rule() { return std::make_shared<ConfidenceRule>(); }
std::shared_ptr<DeferralRule> make_entropy_rule() { return std::make_shared<EntropyRule>(); }
std::shared_ptr<DeferralRule> make_random_rule(RngSeed seed) {
    return std::make_shared<RandomRule>(seed);
}
std::shared_ptr<DeferralRule> make_onehot_oracle_rule() {
    return std::make_shared<OneHotOracleRule>();
}
std::shared_ptr<DeferralRule> make_prob_oracle_rule() { return std::make_shared<ProbOracleRule>(); }
std::shared_ptr<DeferralRule> make_relative_confidence_rule() {
    return std::make_shared<RelativeConfidenceRule>();
}
std::shared_ptr<DeferralRule> make_bayes_rule() { return std::make_shared<BayesRule>(); }
std::shared_ptr<DeferralRule> make_posthoc_rule(std::shared_ptr<const PosthocModel> model) {
    return std::make_shared<PosthocRule>(std::move(model));
}

void CascadeConfig::validate() const {
    if (classifiers.size() < 2) throw ConfigError("cascade needs at least 2 classifiers");
    if (rules.size() != classifiers.size() - 1) {
        throw ConfigError("cascade needs exactly K-1 rules");
    }
    if (thresholds.size() != rules.size()) throw ConfigError("cascade needs K-1 thresholds");
    const int L = classifiers.front()->num_classes();
    for (const auto& clf : classifiers) {
        if (clf == nullptr) throw ConfigError("cascade classifier is null");
        if (clf->num_classes() != L) throw ConfigError("cascade classifiers disagree on classes");
    }
    if (!decision_costs.empty()) {
        if (decision_costs.size() != classifiers.size()) {
            throw ConfigError("decision costs must have one entry per model");
        }
        if (decision_costs.front() != 0.0) throw ConfigError("first decision cost must be 0");
        for (std::size_t k = 1; k < decision_costs.size(); ++k) {
            if (decision_costs[k] < decision_costs[k - 1]) {
                throw ConfigError("decision costs must be nondecreasing");
            }
        }
    }
    if (mode == CascadeMode::kDeployment) {
        for (const auto& rule : rules) {
            if (rule->needs_next_model() || rule->needs_label() || rule->needs_posterior()) {
                throw ConfigError("rule '" + rule->name() +
                                  "' needs oracle inputs and cannot run in deployment mode");
            }
        }
    }
}

CascadeResult run_cascade(const CascadeConfig& cfg, const std::vector<double>& x,
                          std::uint64_t example_id, const AnalysisContext* ctx) {
    cfg.validate();
    const std::size_t K = cfg.classifiers.size();

    CascadeResult result;
    result.invoked.assign(K, false);
    std::vector<std::optional<ProbVector>> probs(K);
    const auto model_output = [&](std::size_t k) -> const ProbVector& {
        if (!probs[k].has_value()) {
            probs[k] = cfg.classifiers[k]->predict_proba(x);
            result.invoked[k] = true;
        }
        return *probs[k];
    };

    std::optional<ProbVector> eta;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        const DeferralRule& rule = *cfg.rules[k];
        StageInputs in;
        in.p_current = &model_output(k);
        in.example_id = example_id;
        if (rule.needs_next_model()) in.p_next = &model_output(k + 1);
        if (rule.needs_label()) {
            if (ctx == nullptr || !ctx->label.has_value()) {
                throw ConfigError("rule '" + rule.name() + "' needs the true label");
            }
            in.label = ctx->label;
        }
        if (rule.needs_posterior()) {
            if (ctx == nullptr || ctx->world == nullptr) {
                throw ConfigError("rule '" + rule.name() + "' needs the world posterior");
            }
            if (!eta.has_value()) eta = ctx->world->posterior(x);
            in.posterior = &*eta;
        }
        if (!rule.defers(in, cfg.thresholds[k])) {
            result.prediction = argmax_label(*probs[k]);
            result.exit_index = static_cast<int>(k) + 1;
            return result;
        }
    }
    result.prediction = argmax_label(model_output(K - 1));
    result.exit_index = static_cast<int>(K);
    return result;
}

int optimal_selector(const std::vector<double>& error_probs, const std::vector<double>& costs) {
    if (error_probs.empty() || error_probs.size() != costs.size()) {
        throw ShapeError("optimal_selector: error/cost lengths differ");
    }
    int best = 0;
    double best_objective = error_probs[0] + costs[0];
    for (std::size_t k = 1; k < error_probs.size(); ++k) {
        const double objective = error_probs[k] + costs[k];
        if (objective < best_objective) {
            best = static_cast<int>(k);
            best_objective = objective;
        }
    }
    return best;
}

}  // namespace cascadelab
