#include <doctest.h>

#include <cmath>
#include <memory>

#include "cascadelab/deferral.hpp"
#include "cascadelab/eval.hpp"

using namespace cascadelab;

namespace {

class CountingClassifier : public Classifier {
public:
    CountingClassifier(std::shared_ptr<const Classifier> inner) : inner_(std::move(inner)) {}
    ProbVector predict_proba(const std::vector<double>& x) const override {
        ++calls_;
        return inner_->predict_proba(x);
    }
    int num_classes() const override { return inner_->num_classes(); }
    std::size_t calls() const { return calls_; }
    void reset() { calls_ = 0; }

private:
    std::shared_ptr<const Classifier> inner_;
    mutable std::size_t calls_ = 0;
};

std::shared_ptr<const SyntheticWorld> ring_world(int L, double radius, double stddev) {
    std::vector<GaussianMixtureWorld::Component> comps;
    for (int c = 0; c < L; ++c) {
        const double angle = 2.0 * M_PI * c / L;
        comps.push_back({{radius * std::cos(angle), radius * std::sin(angle)}, stddev,
                         1.0 / static_cast<double>(L)});
    }
    return std::make_shared<GaussianMixtureWorld>(std::move(comps));
}

StageInputs inputs_for(const ProbVector& p1) {
    StageInputs in;
    in.p_current = &p1;
    return in;
}

}  // namespace

TEST_CASE("confidence scoring and thresholding") {
    const ProbVector p({0.7, 0.2, 0.1});
    CHECK(score_confidence(p) == -0.7);
    const auto rule = make_confidence_rule();
    CHECK(rule->defers(inputs_for(p), 0.8));        // 0.7 < 0.8
    CHECK_FALSE(rule->defers(inputs_for(p), 0.6));  // 0.7 >= 0.6
    CHECK_FALSE(rule->defers(inputs_for(p), 0.7));  // boundary keeps

    const ProbVector onehot({1.0, 0.0, 0.0});
    CHECK_FALSE(rule->defers(inputs_for(onehot), 1.0));
}

TEST_CASE("entropy scoring") {
    const auto rule = make_entropy_rule();
    const ProbVector onehot({1.0, 0.0});
    CHECK(rule->score(inputs_for(onehot)) == 0.0);
    CHECK_FALSE(rule->defers(inputs_for(onehot), 0.01));
    const ProbVector uniform({0.25, 0.25, 0.25, 0.25});
    CHECK(rule->score(inputs_for(uniform)) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    const ProbVector skew({0.9, 0.1});
    CHECK(rule->score(inputs_for(skew)) == doctest::Approx(0.3250829733914482).epsilon(1e-12));
}

TEST_CASE("bayes scoring keeps the boundary") {
    std::vector<double> raw{0.6, 0.9};
    // eta entries at h1 = 0, h2 = 1
    const ProbVector eta = normalize(raw);
    CHECK(score_bayes(ProbVector({0.1, 0.6, 0.3}), 1, 1) == 0.0);
    CHECK(score_bayes(ProbVector({0.6, 0.1, 0.3}), 1, 0) == doctest::Approx(0.5));
    // strict inequality: 0.3 > 0.3 is false
    const double score = 0.9 - 0.6;
    CHECK(score > 0.2);
    CHECK_FALSE(score > 0.3 + 1e-16);
    (void)eta;
}

TEST_CASE("one-hot oracle defer set is exactly {h1 wrong, h2 right}") {
    CHECK(score_onehot_oracle(3, 1, 3) == 1.0);
    CHECK(score_onehot_oracle(3, 3, 3) == 0.0);
    CHECK(score_onehot_oracle(3, 3, 1) == -1.0);
    for (int y = 0; y < 4; ++y) {
        for (int h1 = 0; h1 < 4; ++h1) {
            for (int h2 = 0; h2 < 4; ++h2) {
                const bool defers = score_onehot_oracle(y, h1, h2) > 0.5;
                CHECK(defers == (h1 != y && h2 == y));
            }
        }
    }
}

TEST_CASE("probability oracle score stays in [-1, 1]") {
    const ProbVector p1({0.4, 0.6});
    const ProbVector p2({0.9, 0.1});
    CHECK(score_prob_oracle(p1, p2, 0) == doctest::Approx(0.5));
    CHECK(score_prob_oracle(p1, p1, 0) == 0.0);
    CHECK(score_prob_oracle(p1, p2, 0) <= 1.0);
    CHECK(score_prob_oracle(p2, p1, 0) >= -1.0);
}

TEST_CASE("relative confidence compares the two maxima") {
    const ProbVector p1({0.5, 0.5});
    const ProbVector p2({0.8, 0.2});
    CHECK(score_relative_confidence(p1, p2) == doctest::Approx(0.3));
    CHECK(score_relative_confidence(p1, p1) == 0.0);
    const ProbVector a({1.0, 0.0});
    const ProbVector b({0.0, 1.0});
    CHECK(score_relative_confidence(a, b) == 0.0);
}

TEST_CASE("posthoc scoring on a zero-weight model") {
    PosthocModel g;
    g.num_classes = 3;
    g.mlp = make_mlp({14, 4, 1});
    const ProbVector p1({0.7, 0.2, 0.1});

    g.target_kind = PosthocTargetKind::kDiff01;
    CHECK(score_posthoc(g, p1) == 0.0);
    g.target_kind = PosthocTargetKind::kMaxProb;
    CHECK(score_posthoc(g, p1) == doctest::Approx(-0.7).epsilon(1e-12));

    const ProbVector wrong({0.5, 0.5});
    CHECK_THROWS_AS(score_posthoc(g, wrong), ShapeError);
}

TEST_CASE("random rule is deterministic per example and uniform across examples") {
    const auto rule = make_random_rule(77);
    StageInputs in;
    const ProbVector p({0.5, 0.5});
    in.p_current = &p;
    std::size_t deferred = 0;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        in.example_id = i;
        const double s1 = rule->score(in);
        const double s2 = rule->score(in);
        CHECK(s1 == s2);
        // threshold 0.7: defer fraction should be 0.3
        deferred += rule->defers(in, 0.7) ? 1 : 0;
    }
    CHECK(std::abs(static_cast<double>(deferred) / 10000.0 - 0.3) < 0.02);
}

TEST_CASE("defer sets grow as the score threshold drops") {
    const auto world = ring_world(4, 3.0, 1.5);
    const Dataset ds = world->sample(400, 9);
    const auto m1 = std::make_shared<TemperatureClassifier>(world, 2.0);
    const auto m2 = std::make_shared<AnalyticClassifier>(world);
    std::vector<std::shared_ptr<DeferralRule>> rules{
        make_confidence_rule(), make_entropy_rule(), make_random_rule(3),
        make_relative_confidence_rule(), make_bayes_rule()};
    for (const auto& rule : rules) {
        for (const auto& ex : ds) {
            StageInputs in;
            const ProbVector p1 = m1->predict_proba(ex.x);
            const ProbVector p2 = m2->predict_proba(ex.x);
            const ProbVector eta = world->posterior(ex.x);
            in.p_current = &p1;
            if (rule->needs_next_model()) in.p_next = &p2;
            if (rule->needs_posterior()) in.posterior = &eta;
            if (rule->needs_label()) in.label = ex.y;
            const double score = rule->score(in);
            // monotone in the threshold: deferring at t implies deferring below t
            for (double t : {-0.9, -0.5, 0.0, 0.4, 1.2}) {
                const bool at_t = score > t;
                const bool below = score > t - 0.3;
                if (at_t) CHECK(below);
            }
        }
    }
}

TEST_CASE("cascade executor: threshold extremes and exit indices") {
    const auto world = ring_world(3, 4.0, 1.0);
    CascadeConfig cfg;
    cfg.classifiers = {std::make_shared<TemperatureClassifier>(world, 2.0),
                       std::make_shared<AnalyticClassifier>(world)};
    cfg.rules = {make_confidence_rule()};
    cfg.mode = CascadeMode::kDeployment;
    const Dataset ds = world->sample(50, 21);

    cfg.thresholds = {1.0 + 1e-9};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const CascadeResult res = run_cascade(cfg, ds[i].x, i);
        CHECK(res.exit_index == 2);
        CHECK(res.invoked == std::vector<bool>{true, true});
    }
    cfg.thresholds = {0.0};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const CascadeResult res = run_cascade(cfg, ds[i].x, i);
        CHECK(res.exit_index == 1);
        CHECK(res.invoked == std::vector<bool>{true, false});
    }
}

TEST_CASE("deployment mode rejects oracle rules; analysis mode records invocations") {
    const auto world = ring_world(3, 4.0, 1.0);
    CascadeConfig cfg;
    cfg.classifiers = {std::make_shared<TemperatureClassifier>(world, 2.0),
                       std::make_shared<AnalyticClassifier>(world)};
    cfg.rules = {make_relative_confidence_rule()};
    cfg.thresholds = {10.0};  // never defer
    cfg.mode = CascadeMode::kDeployment;
    CHECK_THROWS_AS(run_cascade(cfg, {0.0, 0.0}), ConfigError);

    cfg.mode = CascadeMode::kAnalysis;
    const CascadeResult res = run_cascade(cfg, {0.0, 0.0});
    CHECK(res.exit_index == 1);
    // the oracle rule had to invoke model 2 even though the cascade kept
    CHECK(res.invoked == std::vector<bool>{true, true});

    cfg.rules = {make_onehot_oracle_rule()};
    CHECK_THROWS_AS(run_cascade(cfg, {0.0, 0.0}), ConfigError);  // no label given
    AnalysisContext ctx;
    ctx.label = 0;
    CHECK_NOTHROW(run_cascade(cfg, {0.0, 0.0}, 0, &ctx));
}

TEST_CASE("keep decisions never invoke later models") {
    const auto world = ring_world(3, 4.0, 1.0);
    auto c1 = std::make_shared<CountingClassifier>(
        std::make_shared<TemperatureClassifier>(world, 2.0));
    auto c2 = std::make_shared<CountingClassifier>(
        std::make_shared<TemperatureClassifier>(world, 1.5));
    auto c3 = std::make_shared<CountingClassifier>(std::make_shared<AnalyticClassifier>(world));
    CascadeConfig cfg;
    cfg.classifiers = {c1, c2, c3};
    cfg.rules = {make_confidence_rule(), make_confidence_rule()};
    cfg.thresholds = {0.0, 0.0};  // keep at stage 1
    const CascadeResult res = run_cascade(cfg, {4.0, 0.0});
    CHECK(res.exit_index == 1);
    CHECK(c1->calls() == 1);
    CHECK(c2->calls() == 0);
    CHECK(c3->calls() == 0);
    CHECK(res.invoked == std::vector<bool>{true, false, false});
}

TEST_CASE("three-model cascade matches a straight-line trace") {
    const auto world = ring_world(4, 2.5, 1.4);
    const auto m1 = std::make_shared<TemperatureClassifier>(world, 3.0);
    const auto m2 = std::make_shared<TemperatureClassifier>(world, 1.5);
    const auto m3 = std::make_shared<AnalyticClassifier>(world);
    const double t1 = 0.55, t2 = 0.75;

    CascadeConfig cfg;
    cfg.classifiers = {m1, m2, m3};
    cfg.rules = {make_confidence_rule(), make_confidence_rule()};
    cfg.thresholds = {t1, t2};

    const Dataset ds = world->sample(1000, 4);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const CascadeResult res = run_cascade(cfg, ds[i].x, i);

        // independent trace of the thresholded max-probability loop
        const ProbVector p1 = m1->predict_proba(ds[i].x);
        int expected_exit;
        int expected_pred;
        if (p1[static_cast<std::size_t>(argmax_label(p1))] >= t1) {
            expected_exit = 1;
            expected_pred = argmax_label(p1);
        } else {
            const ProbVector p2 = m2->predict_proba(ds[i].x);
            if (p2[static_cast<std::size_t>(argmax_label(p2))] >= t2) {
                expected_exit = 2;
                expected_pred = argmax_label(p2);
            } else {
                const ProbVector p3 = m3->predict_proba(ds[i].x);
                expected_exit = 3;
                expected_pred = argmax_label(p3);
            }
        }
        CHECK(res.exit_index == expected_exit);
        CHECK(res.prediction == expected_pred);
    }
}

TEST_CASE("optimal selector: arithmetic argmin with lowest-index ties") {
    CHECK(optimal_selector({0.4, 0.1, 0.05}, {0.0, 0.2, 0.4}) == 1);
    CHECK(optimal_selector({0.4, 0.1, 0.05}, {0.0, 0.0, 0.0}) == 2);
    CHECK(optimal_selector({0.3, 0.3}, {0.0, 0.0}) == 0);
    CHECK_THROWS_AS(optimal_selector({0.1}, {0.0, 0.1}), ShapeError);
}

TEST_CASE("two-model selector reproduces the threshold rule on random draws") {
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t L = 2 + rng.next_below(5);
        std::vector<double> raw(L);
        for (double& v : raw) v = rng.next_double() + 1e-9;
        const ProbVector eta = normalize(raw);
        const int h1 = static_cast<int>(rng.next_below(L));
        const int h2 = static_cast<int>(rng.next_below(L));
        const double c = rng.next_double() * 0.5;
        const int chosen = optimal_selector({1.0 - eta[static_cast<std::size_t>(h1)],
                                             1.0 - eta[static_cast<std::size_t>(h2)]},
                                            {0.0, c});
        const bool defers = score_bayes(eta, h1, h2) > c;
        CHECK((chosen == 1) == defers);
    }
}
