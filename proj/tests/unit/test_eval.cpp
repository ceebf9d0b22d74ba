#include <doctest.h>

#include <cmath>
#include <memory>

#include "cascadelab/eval.hpp"

using namespace cascadelab;

namespace {

// Random discrete world with stored posteriors, plus two arbitrary fixed
// classifiers realized as analytic classifiers of perturbed posteriors.
struct RandomSetup {
    std::shared_ptr<DiscreteWorld> world;
    std::shared_ptr<const Classifier> m1;
    std::shared_ptr<const Classifier> m2;
};

std::shared_ptr<DiscreteWorld> random_world(Rng& rng, std::size_t points, std::size_t L) {
    std::vector<DiscreteWorld::SupportPoint> support;
    std::vector<double> masses(points);
    double total = 0.0;
    for (double& m : masses) {
        m = rng.next_double() + 0.05;
        total += m;
    }
    for (std::size_t i = 0; i < points; ++i) {
        std::vector<double> raw(L);
        for (double& v : raw) v = rng.next_double() + 0.02;
        support.push_back({{static_cast<double>(i)}, masses[i] / total, normalize(raw)});
    }
    // exact mass normalization so the sum check at 1e-12 passes
    double mass_sum = 0.0;
    for (const auto& pt : support) mass_sum += pt.prob;
    support.back().prob += 1.0 - mass_sum;
    return std::make_shared<DiscreteWorld>(std::move(support));
}

RandomSetup random_setup(Rng& rng, std::size_t points, std::size_t L) {
    RandomSetup setup;
    setup.world = random_world(rng, points, L);
    // perturbed copies: same support, different posteriors -> arbitrary
    // fixed predictions.
    const auto perturb = [&](double strength) {
        std::vector<DiscreteWorld::SupportPoint> support;
        for (const auto& pt : setup.world->support()) {
            std::vector<double> raw(L);
            for (std::size_t y = 0; y < L; ++y) {
                raw[y] = pt.posterior[y] * (1.0 - strength) + strength * rng.next_double();
            }
            support.push_back({pt.x, pt.prob, normalize(raw)});
        }
        return std::make_shared<DiscreteWorld>(std::move(support));
    };
    setup.m1 = std::make_shared<AnalyticClassifier>(perturb(0.8));
    setup.m2 = std::make_shared<AnalyticClassifier>(perturb(0.35));
    return setup;
}

}  // namespace

TEST_CASE("pairwise sum matches sequential sum") {
    Rng rng(1);
    std::vector<double> values(1001);
    for (double& v : values) v = rng.next_gaussian();
    double seq = 0.0;
    for (double v : values) seq += v;
    CHECK(pairwise_sum(values) == doctest::Approx(seq).epsilon(1e-12));
    CHECK(pairwise_sum({}) == 0.0);
    CHECK(pairwise_sum({3.5}) == 3.5);
}

TEST_CASE("empirical risk at the threshold extremes equals the model error rates") {
    Rng rng(21);
    const auto setup = random_setup(rng, 8, 4);
    const Dataset ds = setup.world->sample(4000, 3);
    const auto conf = make_confidence_rule();

    double err1 = 0.0, err2 = 0.0;
    for (const auto& ex : ds) {
        err1 += setup.m1->predict(ex.x) != ex.y ? 1.0 : 0.0;
        err2 += setup.m2->predict(ex.x) != ex.y ? 1.0 : 0.0;
    }
    err1 /= static_cast<double>(ds.size());
    err2 /= static_cast<double>(ds.size());

    // threshold 0: never defer -> model-1 error; threshold > 1: always defer
    CHECK(cascade_risk(ds, *setup.m1, *setup.m2, *conf, 0.0, 0.0) ==
          doctest::Approx(err1).epsilon(1e-12));
    const double cost = 0.07;
    CHECK(cascade_risk(ds, *setup.m1, *setup.m2, *conf, 1.1, cost) ==
          doctest::Approx(err2 + cost).epsilon(1e-12));
}

TEST_CASE("exact risk matches an independent finite sum for a random rule") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto setup = random_setup(rng, 7, 3);
        const auto rule = make_random_rule(500 + static_cast<RngSeed>(trial));
        const double threshold = rng.next_double();
        const double cost = rng.next_double() * 0.3;

        // independent hand sum over support x label
        double want = 0.0;
        for (std::size_t i = 0; i < setup.world->support_size(); ++i) {
            const auto& pt = setup.world->support()[i];
            const ProbVector p1 = setup.m1->predict_proba(pt.x);
            StageInputs in;
            in.p_current = &p1;
            in.example_id = i;
            const bool defer = rule->score(in) > threshold;
            const int h1 = setup.m1->predict(pt.x);
            const int h2 = setup.m2->predict(pt.x);
            for (int y = 0; y < 3; ++y) {
                const double w = pt.prob * pt.posterior[static_cast<std::size_t>(y)];
                want += w * (defer ? ((y != h2 ? 1.0 : 0.0) + cost) : (y != h1 ? 1.0 : 0.0));
            }
        }
        const double got =
            cascade_risk_exact(*setup.world, *setup.m1, *setup.m2, *rule, threshold, cost);
        CHECK(std::abs(got - want) < 1e-12);
    }
}

TEST_CASE("excess risk: zero for the optimal rule, single-point flips priced by alpha") {
    Rng rng(41);
    const auto setup = random_setup(rng, 9, 4);
    const double cost = 0.12;
    const auto bayes_defers = [&](std::size_t i) {
        const auto& pt = setup.world->support()[i];
        const double eta1 = pt.posterior[static_cast<std::size_t>(setup.m1->predict(pt.x))];
        const double eta2 = pt.posterior[static_cast<std::size_t>(setup.m2->predict(pt.x))];
        return eta2 - eta1 > cost;
    };
    CHECK(excess_risk(*setup.world, *setup.m1, *setup.m2, bayes_defers, cost) == 0.0);

    for (std::size_t flip = 0; flip < setup.world->support_size(); ++flip) {
        const auto flipped = [&](std::size_t i) {
            return i == flip ? !bayes_defers(i) : bayes_defers(i);
        };
        const auto& pt = setup.world->support()[flip];
        const double eta1 = pt.posterior[static_cast<std::size_t>(setup.m1->predict(pt.x))];
        const double eta2 = pt.posterior[static_cast<std::size_t>(setup.m2->predict(pt.x))];
        const double alpha = eta1 - eta2 + cost;
        CHECK(excess_risk(*setup.world, *setup.m1, *setup.m2, flipped, cost) ==
              doctest::Approx(pt.prob * std::abs(alpha)).epsilon(1e-12));
    }
}

TEST_CASE("excess risk equals the direct risk difference for random defer sets") {
    Rng rng(51);
    for (int trial = 0; trial < 20; ++trial) {
        const auto setup = random_setup(rng, 8, 3);
        const double cost = rng.next_double() * 0.4;
        const auto bayes = [&](std::size_t i) {
            const auto& pt = setup.world->support()[i];
            const double eta1 = pt.posterior[static_cast<std::size_t>(setup.m1->predict(pt.x))];
            const double eta2 = pt.posterior[static_cast<std::size_t>(setup.m2->predict(pt.x))];
            return eta2 - eta1 > cost;
        };
        for (int inner = 0; inner < 20; ++inner) {
            std::vector<bool> defer_set(setup.world->support_size());
            for (std::size_t i = 0; i < defer_set.size(); ++i) defer_set[i] = rng.bernoulli(0.5);
            const auto as_fn = [&](std::size_t i) { return defer_set[i]; };
            const double direct =
                defer_set_risk_exact(*setup.world, *setup.m1, *setup.m2, as_fn, cost) -
                defer_set_risk_exact(*setup.world, *setup.m1, *setup.m2, bayes, cost);
            const double identity = excess_risk(*setup.world, *setup.m1, *setup.m2, as_fn, cost);
            CHECK(std::abs(direct - identity) < 1e-12);
            CHECK(identity >= -1e-15);  // optimality of the threshold rule
        }
    }
}

TEST_CASE("deferral curve endpoints and the random-rule interpolation law") {
    Rng rng(61);
    const auto setup = random_setup(rng, 10, 4);
    const Dataset ds = setup.world->sample(8000, 7);
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);

    double acc1 = 0.0, acc2 = 0.0;
    for (const auto& ex : ds) {
        acc1 += setup.m1->predict(ex.x) == ex.y ? 1.0 : 0.0;
        acc2 += setup.m2->predict(ex.x) == ex.y ? 1.0 : 0.0;
    }
    acc1 /= static_cast<double>(ds.size());
    acc2 /= static_cast<double>(ds.size());

    const auto random_rule = make_random_rule(99);
    const DeferralCurve curve =
        deferral_curve(ds, *setup.m1, *setup.m2, *random_rule, grid, setup.world.get());
    CHECK(curve.points.front().accuracy == doctest::Approx(acc1).epsilon(1e-12));
    CHECK(curve.points.back().accuracy == doctest::Approx(acc2).epsilon(1e-12));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& pt = curve.points[i];
        CHECK(std::abs(pt.deferral_rate - grid[i]) <= 1.0 / static_cast<double>(ds.size()));
        const double expected = (1.0 - pt.deferral_rate) * acc1 + pt.deferral_rate * acc2;
        const double sigma =
            3.0 * std::sqrt(0.25 / static_cast<double>(ds.size())) + 1e-12;
        CHECK(std::abs(pt.accuracy - expected) < 3.0 * sigma);
        CHECK(pt.risk == doctest::Approx(1.0 - pt.accuracy).epsilon(1e-12));
    }
    // rates nondecreasing along the curve
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].deferral_rate >= curve.points[i - 1].deferral_rate);
    }
}

TEST_CASE("curve accuracy stays within the oracle band") {
    Rng rng(71);
    const auto setup = random_setup(rng, 9, 4);
    const Dataset ds = setup.world->sample(4000, 9);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);

    const DeferralCurve oracle = deferral_curve(ds, *setup.m1, *setup.m2,
                                                *make_onehot_oracle_rule(), grid, setup.world.get());
    double oracle_peak = 0.0;
    for (const auto& pt : oracle.points) oracle_peak = std::max(oracle_peak, pt.accuracy);
    const double acc1 = oracle.points.front().accuracy;
    const double acc2 = oracle.points.back().accuracy;
    const double floor = std::min(acc1, acc2);
    const double stderr_bound = 3.0 * std::sqrt(0.25 / static_cast<double>(ds.size()));

    for (const auto& rule :
         {make_confidence_rule(), make_entropy_rule(), make_bayes_rule(),
          make_relative_confidence_rule(), make_prob_oracle_rule(), make_random_rule(1)}) {
        const DeferralCurve curve =
            deferral_curve(ds, *setup.m1, *setup.m2, *rule, grid, setup.world.get());
        for (const auto& pt : curve.points) {
            CHECK(pt.accuracy >= floor - stderr_bound);
            CHECK(pt.accuracy <= oracle_peak + stderr_bound);
        }
    }
}

TEST_CASE("accuracy identity: equal expectations force equal accuracies") {
    // two-point world with symmetric beta so two different defer sets match
    std::vector<DiscreteWorld::SupportPoint> support;
    support.push_back({{0.0}, 0.5, ProbVector({0.6, 0.4})});
    support.push_back({{1.0}, 0.5, ProbVector({0.6, 0.4})});
    const DiscreteWorld world(support);
    // model 1 predicts class 1 (eta 0.4), model 2 predicts class 0 (eta 0.6)
    std::vector<DiscreteWorld::SupportPoint> w1, w2;
    for (const auto& pt : world.support()) {
        w1.push_back({pt.x, pt.prob, ProbVector({0.1, 0.9})});
        w2.push_back({pt.x, pt.prob, ProbVector({0.9, 0.1})});
    }
    const AnalyticClassifier m1(std::make_shared<DiscreteWorld>(w1));
    const AnalyticClassifier m2(std::make_shared<DiscreteWorld>(w2));

    const auto defer_first = [](std::size_t i) { return i == 0; };
    const auto defer_second = [](std::size_t i) { return i == 1; };
    const auto report = accuracy_identity_check(world, m1, m2, defer_first, defer_second);
    CHECK(report.expectation_residual == 0.0);
    CHECK(report.accuracy_residual == 0.0);
    CHECK(report.consistent);

    const auto same = accuracy_identity_check(world, m1, m2, defer_first, defer_first);
    CHECK(same.expectation_residual == 0.0);
    CHECK(same.accuracy_residual == 0.0);
    CHECK(same.consistent);

    // different expectations -> accuracy gap equals the expectation gap
    const auto defer_none = [](std::size_t) { return false; };
    const auto diff = accuracy_identity_check(world, m1, m2, defer_first, defer_none);
    CHECK(diff.accuracy_residual == doctest::Approx(diff.expectation_residual).epsilon(1e-12));
}

TEST_CASE("calibration report buckets confidences and counts the fix-up event") {
    Rng rng(81);
    const auto setup = random_setup(rng, 10, 4);
    const Dataset ds = setup.world->sample(2000, 13);
    const CalibrationReport report = calibration_report(ds, *setup.m1, *setup.m2);
    std::size_t total = 0;
    for (const auto& bucket : report.buckets) {
        total += bucket.count;
        if (bucket.count > 0) {
            CHECK(bucket.mean_confidence >= bucket.lo - 1e-12);
            CHECK(bucket.mean_confidence <= bucket.hi + 1e-12);
        }
        CHECK(bucket.event_frequency >= 0.0);
        CHECK(bucket.event_frequency <= 1.0);
    }
    CHECK(total == ds.size());

    // identical models make the event impossible
    const CalibrationReport none = calibration_report(ds, *setup.m1, *setup.m1);
    for (const auto& bucket : none.buckets) CHECK(bucket.event_frequency == 0.0);
}

TEST_CASE("all mass lands in the last bucket when confidence is one") {
    std::vector<DiscreteWorld::SupportPoint> support;
    support.push_back({{0.0}, 1.0, ProbVector({1.0, 0.0})});
    const auto world = std::make_shared<DiscreteWorld>(support);
    const AnalyticClassifier clf(world);
    const Dataset ds = world->sample(50, 3);
    const CalibrationReport report = calibration_report(ds, clf, clf);
    CHECK(report.buckets[9].count == 50);
}

TEST_CASE("enumeration oracle: trivial one-point worlds") {
    std::vector<DiscreteWorld::SupportPoint> support;
    support.push_back({{0.0}, 1.0, ProbVector({0.1, 0.6, 0.3})});
    const DiscreteWorld world(support);
    std::vector<DiscreteWorld::SupportPoint> w1{{{0.0}, 1.0, ProbVector({0.9, 0.05, 0.05})}};
    std::vector<DiscreteWorld::SupportPoint> w2{{{0.0}, 1.0, ProbVector({0.05, 0.9, 0.05})}};
    const AnalyticClassifier m1(std::make_shared<DiscreteWorld>(w1));  // predicts 0, eta 0.1
    const AnalyticClassifier m2(std::make_shared<DiscreteWorld>(w2));  // predicts 1, eta 0.6

    // gain 0.5 > cost 0.2: defer
    const EnumeratedRule best = enumerate_optimal_rule(world, m1, m2, 0.2);
    CHECK(best.defer_set == std::vector<bool>{true});
    CHECK(best.risk == doctest::Approx(0.4 + 0.2).epsilon(1e-12));

    // cost 1: never defer (score <= 1 cannot strictly exceed it)
    const EnumeratedRule keep = enumerate_optimal_rule(world, m1, m2, 1.0);
    CHECK(keep.defer_set == std::vector<bool>{false});

    Rng rng(5);
    const auto big = random_world(rng, 13, 3);
    CHECK_THROWS_AS(enumerate_optimal_rule(*big, m1, m2, 0.1), ConfigError);
}

TEST_CASE("relative inference cost from invocation patterns") {
    CascadeResult always;
    always.invoked = {true, true};
    CascadeResult never;
    never.invoked = {true, false};
    CHECK(relative_inference_cost({always}, {1.0, 4.0}) == doctest::Approx(5.0 / 4.0));
    CHECK(relative_inference_cost({never}, {1.0, 4.0}) == doctest::Approx(1.0 / 4.0));
    CHECK(relative_inference_cost({always, never}, {1.0, 4.0}) == doctest::Approx(0.75));
    CHECK(relative_inference_cost(1.0, 1.0, 4.0) == doctest::Approx(5.0 / 4.0));
    CHECK(relative_inference_cost(0.0, 1.0, 4.0) == doctest::Approx(0.25));

    // four-point trace for a 3-model cascade
    CascadeResult exit1, exit2, exit3a, exit3b;
    exit1.invoked = {true, false, false};
    exit2.invoked = {true, true, false};
    exit3a.invoked = {true, true, true};
    exit3b.invoked = {true, true, true};
    const double want = (1.0 + 3.0 + 7.0 + 7.0) / (4.0 * 4.0);
    CHECK(relative_inference_cost({exit1, exit2, exit3a, exit3b}, {1.0, 2.0, 4.0}) ==
          doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("staged sweep: endpoints route everything to one model") {
    Rng rng(91);
    const auto setup = random_setup(rng, 10, 4);
    const auto m3 = setup.m2;
    const Dataset ds = setup.world->sample(1000, 15);
    std::vector<std::shared_ptr<const Classifier>> models{setup.m1, setup.m2, m3};
    std::vector<std::shared_ptr<const DeferralRule>> rules{make_confidence_rule(),
                                                           make_confidence_rule()};
    const auto sweep =
        staged_quantile_sweep(ds, models, rules, {0.0, 0.5, 1.0}, {1.0, 2.0, 4.0});
    REQUIRE(sweep.size() == 3);
    CHECK(sweep.front().exit_fractions[0] == 1.0);
    CHECK(sweep.front().relative_cost == doctest::Approx(0.25));
    CHECK(sweep.back().exit_fractions[2] == 1.0);
    CHECK(sweep.back().relative_cost == doctest::Approx(7.0 / 4.0));
}

TEST_CASE("specialist confidence systematically over-estimates the fix-up event") {
    // downstream model is near-chance outside its good group, so the
    // headroom implied by model-1 confidence exceeds how often deferring
    // can actually fix anything
    std::vector<GaussianMixtureWorld::Component> comps;
    for (int c = 0; c < 10; ++c) {
        const double angle = 2.0 * M_PI * c / 10.0;
        comps.push_back({{10.0 * std::cos(angle), 10.0 * std::sin(angle)}, 1.0, 0.1});
    }
    const auto world = std::make_shared<GaussianMixtureWorld>(comps);
    SpecialistSplitTransform split;
    split.good_classes = {0, 1};
    const auto m1 = std::make_shared<TemperatureClassifier>(world, 2.0);
    const auto m2 = std::make_shared<SpecialistClassifier>(
        world, make_specialist_world(world, split), 0.02, 0.02);
    const Dataset ds = world->sample(20000, 51);
    const CalibrationReport report = calibration_report(ds, *m1, *m2);

    double headroom = 0.0, event = 0.0, mass = 0.0;
    for (const auto& bucket : report.buckets) {
        if (bucket.lo < 0.5 || bucket.count == 0) continue;
        const double n = static_cast<double>(bucket.count);
        headroom += n * (1.0 - bucket.mean_confidence);
        event += n * bucket.event_frequency;
        mass += n;
    }
    REQUIRE(mass > 1000);
    CHECK(headroom / mass > event / mass);
}
