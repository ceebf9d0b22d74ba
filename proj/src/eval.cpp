#include "cascadelab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cascadelab/parallel.hpp"

namespace cascadelab {

double pairwise_sum(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    std::vector<double> level(values);
    while (level.size() > 1) {
        std::vector<double> next((level.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) next[i / 2] = level[i] + level[i + 1];
        if (level.size() % 2 == 1) next.back() = level.back();
        level = std::move(next);
    }
    return level.front();
}

namespace {

/// Everything a rule can read about one example, owned storage.
struct ExampleView {
    ProbVector p1;
    ProbVector p2;
    ProbVector eta;
    int h1;
    int h2;

    StageInputs inputs(const DeferralRule& rule, std::optional<int> label,
                       std::uint64_t example_id) const {
        StageInputs in;
        in.p_current = &p1;
        in.example_id = example_id;
        if (rule.needs_next_model()) in.p_next = &p2;
        if (rule.needs_label()) in.label = label;
        if (rule.needs_posterior()) in.posterior = &eta;
        return in;
    }
};

ExampleView view_example(const std::vector<double>& x, const Classifier& model1,
                         const Classifier& model2, const DeferralRule& rule,
                         const SyntheticWorld* world) {
    ProbVector p1 = model1.predict_proba(x);
    ProbVector p2 = model2.predict_proba(x);
    ProbVector eta = [&] {
        if (rule.needs_posterior()) {
            if (world == nullptr) {
                throw ConfigError("rule '" + rule.name() +
                                  "' needs an analytic world to evaluate");
            }
            return world->posterior(x);
        }
        return p1;  // placeholder, unused
    }();
    const int h1 = argmax_label(p1);
    const int h2 = argmax_label(p2);
    return ExampleView{std::move(p1), std::move(p2), std::move(eta), h1, h2};
}

}  // namespace

double cascade_risk(const Dataset& ds, const Classifier& model1, const Classifier& model2,
                    const DeferralRule& rule, double threshold, double cost,
                    const SyntheticWorld* world) {
    std::vector<double> values(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
        const LabeledExample& ex = ds[i];
        const ExampleView v = view_example(ex.x, model1, model2, rule, world);
        const bool defer = rule.defers(v.inputs(rule, ex.y, i), threshold);
        values[i] = defer ? ((ex.y != v.h2 ? 1.0 : 0.0) + cost) : (ex.y != v.h1 ? 1.0 : 0.0);
    });
    return pairwise_sum(values) / static_cast<double>(ds.size());
}

double cascade_risk_exact(const DiscreteWorld& world, const Classifier& model1,
                          const Classifier& model2, const DeferralRule& rule, double threshold,
                          double cost) {
    const int L = world.num_classes();
    std::vector<double> terms;
    terms.reserve(world.support_size());
    for (std::size_t i = 0; i < world.support_size(); ++i) {
        const auto& pt = world.support()[i];
        const ExampleView v = view_example(pt.x, model1, model2, rule, &world);
        double point_value = 0.0;
        if (rule.needs_label()) {
            // Integrate the label-dependent decision over y | x.
            for (int y = 0; y < L; ++y) {
                const bool defer = rule.defers(v.inputs(rule, y, i), threshold);
                const double value =
                    defer ? ((y != v.h2 ? 1.0 : 0.0) + cost) : (y != v.h1 ? 1.0 : 0.0);
                point_value += pt.posterior[static_cast<std::size_t>(y)] * value;
            }
        } else {
            const bool defer = rule.defers(v.inputs(rule, std::nullopt, i), threshold);
            const double eta1 = pt.posterior[static_cast<std::size_t>(v.h1)];
            const double eta2 = pt.posterior[static_cast<std::size_t>(v.h2)];
            point_value = defer ? (1.0 - eta2 + cost) : (1.0 - eta1);
        }
        terms.push_back(pt.prob * point_value);
    }
    return pairwise_sum(terms);
}

double defer_set_risk_exact(const DiscreteWorld& world, const Classifier& model1,
                            const Classifier& model2,
                            const std::function<bool(std::size_t)>& defers, double cost) {
    std::vector<double> terms;
    terms.reserve(world.support_size());
    for (std::size_t i = 0; i < world.support_size(); ++i) {
        const auto& pt = world.support()[i];
        const double eta1 = pt.posterior[static_cast<std::size_t>(model1.predict(pt.x))];
        const double eta2 = pt.posterior[static_cast<std::size_t>(model2.predict(pt.x))];
        terms.push_back(pt.prob * (defers(i) ? (1.0 - eta2 + cost) : (1.0 - eta1)));
    }
    return pairwise_sum(terms);
}

double excess_risk(const DiscreteWorld& world, const Classifier& model1, const Classifier& model2,
                   const std::function<bool(std::size_t)>& defers, double cost) {
    std::vector<double> terms;
    terms.reserve(world.support_size());
    for (std::size_t i = 0; i < world.support_size(); ++i) {
        const auto& pt = world.support()[i];
        const double eta1 = pt.posterior[static_cast<std::size_t>(model1.predict(pt.x))];
        const double eta2 = pt.posterior[static_cast<std::size_t>(model2.predict(pt.x))];
        const double alpha = eta1 - eta2 + cost;
        const double rule_indicator = defers(i) ? 1.0 : 0.0;
        const double optimal_indicator = alpha < 0.0 ? 1.0 : 0.0;
        terms.push_back(pt.prob * (rule_indicator - optimal_indicator) * alpha);
    }
    return pairwise_sum(terms);
}

double excess_risk(const DiscreteWorld& world, const Classifier& model1, const Classifier& model2,
                   const DeferralRule& rule, double threshold, double cost) {
    if (rule.needs_label()) {
        throw ConfigError("excess risk is defined for label-independent rules");
    }
    std::vector<bool> decisions(world.support_size());
    for (std::size_t i = 0; i < world.support_size(); ++i) {
        const auto& pt = world.support()[i];
        const ExampleView v = view_example(pt.x, model1, model2, rule, &world);
        decisions[i] = rule.defers(v.inputs(rule, std::nullopt, i), threshold);
    }
    return excess_risk(world, model1, model2,
                       [&](std::size_t i) { return decisions[i]; }, cost);
}

// ---------------------------------------------------------------------------
// Curves

DeferralCurve deferral_curve(const Dataset& ds, const Classifier& model1,
                             const Classifier& model2, const DeferralRule& rule,
                             const std::vector<double>& rate_grid, const SyntheticWorld* world) {
    if (rate_grid.empty()) throw ConfigError("deferral_curve: empty rate grid");
    const std::size_t n = ds.size();

    std::vector<double> scores(n);
    std::vector<int> correct1(n), correct2(n);
    parallel_for(n, [&](std::size_t i) {
        const LabeledExample& ex = ds[i];
        const ExampleView v = view_example(ex.x, model1, model2, rule, world);
        scores[i] = rule.score(v.inputs(rule, ex.y, i));
        correct1[i] = ex.y == v.h1 ? 1 : 0;
        correct2[i] = ex.y == v.h2 ? 1 : 0;
    });

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // prefix[k] = correct counts over the k highest-scoring examples
    std::vector<long> deferred_correct(n + 1, 0), kept_correct(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) {
        deferred_correct[k + 1] = deferred_correct[k] + correct2[order[k]];
        kept_correct[k + 1] = kept_correct[k] + correct1[order[k]];
    }
    const long total_correct1 = kept_correct[n];

    DeferralCurve curve;
    curve.rule = rule.name();
    for (double target : rate_grid) {
        if (target < 0.0 || target > 1.0) throw ConfigError("deferral rate outside [0,1]");
        const std::size_t k = static_cast<std::size_t>(
            std::llround(target * static_cast<double>(n)));
        CurvePoint pt;
        pt.deferral_rate = static_cast<double>(k) / static_cast<double>(n);
        const long correct = deferred_correct[k] + (total_correct1 - kept_correct[k]);
        pt.accuracy = static_cast<double>(correct) / static_cast<double>(n);
        pt.risk = 1.0 - pt.accuracy;
        pt.threshold = k > 0 ? scores[order[k - 1]] : std::numeric_limits<double>::infinity();
        curve.points.push_back(pt);
    }
    return curve;
}

DeferralCurve deferral_curve_exact(const DiscreteWorld& world, const Classifier& model1,
                                   const Classifier& model2, const DeferralRule& rule,
                                   const std::vector<double>& rate_grid) {
    if (rate_grid.empty()) throw ConfigError("deferral_curve_exact: empty rate grid");
    if (rule.needs_label()) {
        throw ConfigError("exact deferral curves need label-independent rules");
    }
    const std::size_t m = world.support_size();
    std::vector<double> scores(m), mass(m), acc_keep(m), acc_defer(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& pt = world.support()[i];
        const ExampleView v = view_example(pt.x, model1, model2, rule, &world);
        scores[i] = rule.score(v.inputs(rule, std::nullopt, i));
        mass[i] = pt.prob;
        acc_keep[i] = pt.prob * pt.posterior[static_cast<std::size_t>(v.h1)];
        acc_defer[i] = pt.prob * pt.posterior[static_cast<std::size_t>(v.h2)];
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    DeferralCurve curve;
    curve.rule = rule.name();
    double base_accuracy = 0.0;
    for (std::size_t i = 0; i < m; ++i) base_accuracy += acc_keep[i];

    for (double target : rate_grid) {
        if (target < 0.0 || target > 1.0) throw ConfigError("deferral rate outside [0,1]");
        double rate = 0.0;
        double accuracy = base_accuracy;
        double threshold = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t i = order[k];
            if (rate + mass[i] > target + 1e-12) break;
            rate += mass[i];
            accuracy += acc_defer[i] - acc_keep[i];
            threshold = scores[i];
        }
        CurvePoint pt;
        pt.deferral_rate = rate;
        pt.accuracy = accuracy;
        pt.risk = 1.0 - accuracy;
        pt.threshold = threshold;
        curve.points.push_back(pt);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Accuracy identity

AccuracyIdentityReport accuracy_identity_check(const DiscreteWorld& world,
                                               const Classifier& model1, const Classifier& model2,
                                               const std::function<bool(std::size_t)>& defers_a,
                                               const std::function<bool(std::size_t)>& defers_b,
                                               double tolerance) {
    std::vector<double> erb_a, erb_b, acc_a, acc_b;
    for (std::size_t i = 0; i < world.support_size(); ++i) {
        const auto& pt = world.support()[i];
        const double eta1 = pt.posterior[static_cast<std::size_t>(model1.predict(pt.x))];
        const double eta2 = pt.posterior[static_cast<std::size_t>(model2.predict(pt.x))];
        const double beta = eta2 - eta1;
        const bool ra = defers_a(i);
        const bool rb = defers_b(i);
        erb_a.push_back(ra ? pt.prob * beta : 0.0);
        erb_b.push_back(rb ? pt.prob * beta : 0.0);
        acc_a.push_back(pt.prob * (ra ? eta2 : eta1));
        acc_b.push_back(pt.prob * (rb ? eta2 : eta1));
    }
    AccuracyIdentityReport report;
    report.expectation_a = pairwise_sum(erb_a);
    report.expectation_b = pairwise_sum(erb_b);
    report.accuracy_a = pairwise_sum(acc_a);
    report.accuracy_b = pairwise_sum(acc_b);
    report.expectation_residual = std::abs(report.expectation_a - report.expectation_b);
    report.accuracy_residual = std::abs(report.accuracy_a - report.accuracy_b);
    report.consistent =
        (report.expectation_residual <= tolerance) == (report.accuracy_residual <= tolerance);
    return report;
}

// ---------------------------------------------------------------------------
// Calibration

CalibrationReport calibration_report(const Dataset& ds, const Classifier& model1,
                                     const Classifier& model2) {
    CalibrationReport report;
    for (std::size_t b = 0; b < report.buckets.size(); ++b) {
        report.buckets[b].lo = static_cast<double>(b) / 10.0;
        report.buckets[b].hi = static_cast<double>(b + 1) / 10.0;
    }
    std::array<double, 10> conf_sum{};
    std::array<std::size_t, 10> event_count{};
    for (const auto& ex : ds) {
        const ProbVector p1 = model1.predict_proba(ex.x);
        const int h1 = argmax_label(p1);
        const double confidence = p1[static_cast<std::size_t>(h1)];
        const int h2 = model2.predict(ex.x);
        std::size_t b = static_cast<std::size_t>(confidence * 10.0);
        if (b > 9) b = 9;
        report.buckets[b].count += 1;
        conf_sum[b] += confidence;
        if (h1 != ex.y && h2 == ex.y) event_count[b] += 1;
    }
    for (std::size_t b = 0; b < 10; ++b) {
        if (report.buckets[b].count > 0) {
            const double n = static_cast<double>(report.buckets[b].count);
            report.buckets[b].mean_confidence = conf_sum[b] / n;
            report.buckets[b].event_frequency = static_cast<double>(event_count[b]) / n;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Brute-force oracles

EnumeratedRule enumerate_optimal_rule(const DiscreteWorld& world, const Classifier& model1,
                                      const Classifier& model2, double cost) {
    const std::size_t m = world.support_size();
    if (m > 12) {
        throw ConfigError("enumerate_optimal_rule: support of " + std::to_string(m) +
                          " points exceeds the limit of 12");
    }
    std::vector<double> keep_term(m), defer_term(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& pt = world.support()[i];
        const double eta1 = pt.posterior[static_cast<std::size_t>(model1.predict(pt.x))];
        const double eta2 = pt.posterior[static_cast<std::size_t>(model2.predict(pt.x))];
        keep_term[i] = pt.prob * (1.0 - eta1);
        defer_term[i] = pt.prob * (1.0 - eta2 + cost);
    }
    EnumeratedRule best;
    best.risk = std::numeric_limits<double>::infinity();
    const std::uint32_t limit = static_cast<std::uint32_t>(1u << m);
    for (std::uint32_t mask = 0; mask < limit; ++mask) {
        double risk = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            risk += (mask >> i) & 1u ? defer_term[i] : keep_term[i];
        }
        if (risk < best.risk) {
            best.risk = risk;
            best.defer_set.assign(m, false);
            for (std::size_t i = 0; i < m; ++i) best.defer_set[i] = (mask >> i) & 1u;
        }
    }
    return best;
}

EnumeratedSelector enumerate_optimal_selector(
    const DiscreteWorld& world, const std::vector<std::shared_ptr<const Classifier>>& classifiers,
    const std::vector<double>& costs) {
    const std::size_t m = world.support_size();
    const std::size_t K = classifiers.size();
    if (m > 8) {
        throw ConfigError("enumerate_optimal_selector: support of " + std::to_string(m) +
                          " points exceeds the limit of 8");
    }
    if (K != costs.size() || K < 2) throw ConfigError("selector needs one cost per classifier");

    // objective[i][k] = Pr(x_i) * (error probability of model k at x_i + cost_k)
    std::vector<std::vector<double>> objective(m, std::vector<double>(K));
    for (std::size_t i = 0; i < m; ++i) {
        const auto& pt = world.support()[i];
        for (std::size_t k = 0; k < K; ++k) {
            const double eta = pt.posterior[static_cast<std::size_t>(classifiers[k]->predict(pt.x))];
            objective[i][k] = pt.prob * (1.0 - eta + costs[k]);
        }
    }
    EnumeratedSelector best;
    best.risk = std::numeric_limits<double>::infinity();
    std::vector<int> assignment(m, 0);
    while (true) {
        double risk = 0.0;
        for (std::size_t i = 0; i < m; ++i) risk += objective[i][static_cast<std::size_t>(assignment[i])];
        if (risk < best.risk) {
            best.risk = risk;
            best.assignment = assignment;
        }
        std::size_t pos = 0;
        while (pos < m) {
            assignment[pos] += 1;
            if (assignment[pos] < static_cast<int>(K)) break;
            assignment[pos] = 0;
            ++pos;
        }
        if (pos == m) break;
    }
    return best;
}

double optimal_selector_risk_exact(
    const DiscreteWorld& world, const std::vector<std::shared_ptr<const Classifier>>& classifiers,
    const std::vector<double>& costs) {
    const std::size_t K = classifiers.size();
    if (K != costs.size() || K < 2) throw ConfigError("selector needs one cost per classifier");
    std::vector<double> terms;
    terms.reserve(world.support_size());
    for (const auto& pt : world.support()) {
        std::vector<double> errors(K);
        for (std::size_t k = 0; k < K; ++k) {
            errors[k] = 1.0 - pt.posterior[static_cast<std::size_t>(classifiers[k]->predict(pt.x))];
        }
        const int chosen = optimal_selector(errors, costs);
        terms.push_back(pt.prob * (errors[static_cast<std::size_t>(chosen)] +
                                   costs[static_cast<std::size_t>(chosen)]));
    }
    return pairwise_sum(terms);
}

// ---------------------------------------------------------------------------
// Inference cost

double relative_inference_cost(const std::vector<CascadeResult>& results,
                               const std::vector<double>& model_costs) {
    if (results.empty()) throw ConfigError("relative_inference_cost: no results");
    for (double c : model_costs) {
        if (!(c > 0.0)) throw ConfigError("model costs must be positive");
    }
    std::vector<double> spent(results.size(), 0.0);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& res = results[i];
        if (res.invoked.size() != model_costs.size()) {
            throw ShapeError("cascade result does not match the cost vector");
        }
        for (std::size_t k = 0; k < model_costs.size(); ++k) {
            if (res.invoked[k]) spent[i] += model_costs[k];
        }
    }
    return pairwise_sum(spent) / (static_cast<double>(results.size()) * model_costs.back());
}

double relative_inference_cost(double deferral_rate, double cost1, double cost2) {
    if (!(cost1 > 0.0) || !(cost2 > 0.0)) throw ConfigError("model costs must be positive");
    return (cost1 + deferral_rate * cost2) / cost2;
}

// ---------------------------------------------------------------------------
// Multi-stage sweep

std::vector<SweepPoint> staged_quantile_sweep(
    const Dataset& ds, const std::vector<std::shared_ptr<const Classifier>>& classifiers,
    const std::vector<std::shared_ptr<const DeferralRule>>& rules,
    const std::vector<double>& quantile_grid, const std::vector<double>& model_costs,
    const SyntheticWorld* world) {
    const std::size_t K = classifiers.size();
    if (K < 2 || rules.size() != K - 1) throw ConfigError("sweep needs K models and K-1 rules");
    if (model_costs.size() != K) throw ConfigError("sweep needs one cost per model");
    const std::size_t n = ds.size();

    // Stage scores as if every example reached every stage.
    std::vector<std::vector<ProbVector>> probs(n);
    parallel_for(n, [&](std::size_t i) {
        std::vector<ProbVector> per_model;
        per_model.reserve(K);
        for (const auto& clf : classifiers) per_model.push_back(clf->predict_proba(ds[i].x));
        probs[i] = std::move(per_model);
    });
    std::vector<std::vector<double>> stage_scores(K - 1, std::vector<double>(n));
    for (std::size_t k = 0; k + 1 < K; ++k) {
        const DeferralRule& rule = *rules[k];
        for (std::size_t i = 0; i < n; ++i) {
            StageInputs in;
            in.p_current = &probs[i][k];
            in.example_id = i;
            if (rule.needs_next_model()) in.p_next = &probs[i][k + 1];
            if (rule.needs_label()) in.label = ds[i].y;
            ProbVector eta = probs[i][k];
            if (rule.needs_posterior()) {
                if (world == nullptr) throw ConfigError("sweep rule needs an analytic world");
                eta = world->posterior(ds[i].x);
                in.posterior = &eta;
            }
            stage_scores[k][i] = rule.score(in);
        }
    }
    // rank of each example within each stage (0 = highest score, stable ties)
    std::vector<std::vector<std::size_t>> stage_rank(K - 1, std::vector<std::size_t>(n));
    std::vector<std::vector<std::size_t>> stage_order(K - 1);
    for (std::size_t k = 0; k + 1 < K; ++k) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return stage_scores[k][a] > stage_scores[k][b];
        });
        for (std::size_t pos = 0; pos < n; ++pos) stage_rank[k][order[pos]] = pos;
        stage_order[k] = std::move(order);
    }

    std::vector<SweepPoint> sweep;
    for (double q : quantile_grid) {
        if (q < 0.0 || q > 1.0) throw ConfigError("sweep quantile outside [0,1]");
        const std::size_t cut = static_cast<std::size_t>(std::llround(q * static_cast<double>(n)));
        SweepPoint pt;
        pt.quantile = q;
        for (std::size_t k = 0; k + 1 < K; ++k) {
            pt.thresholds.push_back(cut > 0
                                        ? stage_scores[k][stage_order[k][cut - 1]]
                                        : std::numeric_limits<double>::infinity());
        }
        pt.exit_fractions.assign(K, 0.0);
        long correct = 0;
        double total_cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t exit = K - 1;
            for (std::size_t k = 0; k + 1 < K; ++k) {
                if (stage_rank[k][i] >= cut) {  // outside the deferred top-q block
                    exit = k;
                    break;
                }
            }
            pt.exit_fractions[exit] += 1.0;
            for (std::size_t k = 0; k <= exit; ++k) total_cost += model_costs[k];
            if (argmax_label(probs[i][exit]) == ds[i].y) ++correct;
        }
        for (double& f : pt.exit_fractions) f /= static_cast<double>(n);
        pt.accuracy = static_cast<double>(correct) / static_cast<double>(n);
        pt.relative_cost = total_cost / (static_cast<double>(n) * model_costs.back());
        sweep.push_back(std::move(pt));
    }
    return sweep;
}

}  // namespace cascadelab
