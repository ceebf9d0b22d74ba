#include <doctest.h>

#include <cmath>
#include <memory>

#include <filesystem>

#include "cascadelab/model_io.hpp"
#include "cascadelab/models.hpp"

using namespace cascadelab;

namespace {

std::shared_ptr<const SyntheticWorld> simple_discrete() {
    std::vector<DiscreteWorld::SupportPoint> support;
    support.push_back({{0.0}, 1.0, ProbVector({0.7, 0.3})});
    return std::make_shared<DiscreteWorld>(std::move(support));
}

// Well separated ring of gaussians; the Bayes classifier is essentially
// perfect, so specialist accuracy targets are measurable.
std::shared_ptr<const SyntheticWorld> separated_world(int L) {
    std::vector<GaussianMixtureWorld::Component> comps;
    for (int c = 0; c < L; ++c) {
        const double angle = 2.0 * M_PI * c / L;
        comps.push_back({{20.0 * std::cos(angle), 20.0 * std::sin(angle)}, 1.0,
                         1.0 / static_cast<double>(L)});
    }
    return std::make_shared<GaussianMixtureWorld>(std::move(comps));
}

}  // namespace

TEST_CASE("analytic classifier reproduces the posterior") {
    const auto world = simple_discrete();
    const AnalyticClassifier clf(world);
    const ProbVector p = clf.predict_proba({0.0});
    CHECK(p[0] == 0.7);
    CHECK(p[1] == 0.3);
    CHECK(clf.predict({0.0}) == 0);
}

TEST_CASE("temperature transform: identity at 1, exact arithmetic at 2") {
    const auto world = simple_discrete();
    const TemperatureClassifier identity(world, 1.0);
    const ProbVector p1 = identity.predict_proba({0.0});
    CHECK(p1[0] == doctest::Approx(0.7).epsilon(1e-12));

    const TemperatureClassifier sharp(world, 2.0);
    const ProbVector p2 = sharp.predict_proba({0.0});
    CHECK(p2[0] == doctest::Approx(0.8448275862068965).epsilon(1e-12));
    CHECK(p2[1] == doctest::Approx(0.15517241379310345).epsilon(1e-12));

    CHECK_THROWS_AS(TemperatureClassifier(world, 0.0), ConfigError);
}

TEST_CASE("temperature corruption preserves the argmax for every tau > 0") {
    const auto world = separated_world(6);
    const AnalyticClassifier analytic(world);
    const Dataset ds = world->sample(300, 77);
    for (double tau : {0.2, 0.5, 1.0, 2.0, 5.0}) {
        const TemperatureClassifier corrupted(world, tau);
        for (const auto& ex : ds) {
            CHECK(corrupted.predict(ex.x) == analytic.predict(ex.x));
        }
    }
}

TEST_CASE("specialist classifier meets its group accuracy targets") {
    const int L = 10;
    const auto world = separated_world(L);
    SpecialistSplitTransform split;
    for (int c = 0; c < 3; ++c) split.good_classes.push_back(c);
    const double eps_good = 0.02, eps_bad = 0.02;
    const SpecialistClassifier spec(world, make_specialist_world(world, split), eps_good, eps_bad);
    const auto predicate = make_specialist_world(world, split);

    const Dataset ds = world->sample(20000, 13);
    std::size_t good_n = 0, good_hit = 0, bad_n = 0, bad_hit = 0;
    for (const auto& ex : ds) {
        const int pred = spec.predict(ex.x);
        if (predicate(ex.x)) {
            ++good_n;
            good_hit += pred == ex.y ? 1 : 0;
        } else {
            ++bad_n;
            bad_hit += pred == ex.y ? 1 : 0;
        }
    }
    REQUIRE(good_n > 1000);
    REQUIRE(bad_n > 1000);
    const double good_acc = static_cast<double>(good_hit) / static_cast<double>(good_n);
    const double bad_acc = static_cast<double>(bad_hit) / static_cast<double>(bad_n);
    CHECK(good_acc >= 1.0 - 2.0 * eps_good);
    const double chance = 1.0 / static_cast<double>(L);
    const double stderr_bound = std::sqrt(chance * (1.0 - chance) / static_cast<double>(bad_n));
    CHECK(bad_acc <= chance + 2.0 * eps_bad + 3.0 * stderr_bound);

    // output structure: near one-hot on the good side, near uniform on the bad side
    for (const auto& ex : ds) {
        const ProbVector p = spec.predict_proba(ex.x);
        const double top = p[static_cast<std::size_t>(argmax_label(p))];
        if (predicate(ex.x)) {
            CHECK(top == doctest::Approx(1.0 - eps_good).epsilon(1e-9));
        } else {
            CHECK(top == doctest::Approx(1.0 / L + 2.0 * eps_bad).epsilon(1e-9));
        }
    }
}

TEST_CASE("trained classifier fits separable blobs deterministically") {
    const auto world = separated_world(3);
    const Dataset ds = world->sample(1500, 5);
    TrainHyperparams hp;
    hp.hidden_sizes = {16};
    hp.epochs = 12;
    hp.learning_rate = 5e-3;

    const TrainedClassifier a = train_classifier(ds, hp, 42);
    CHECK(a.final_train_accuracy >= 0.99);
    CHECK(a.loss_curve.front() >= a.loss_curve.back());

    const TrainedClassifier b = train_classifier(ds, hp, 42);
    for (std::size_t l = 0; l < a.classifier->model().num_layers(); ++l) {
        CHECK(a.classifier->model().weights[l] == b.classifier->model().weights[l]);
        CHECK(a.classifier->model().biases[l] == b.classifier->model().biases[l]);
    }

    TrainHyperparams frozen = hp;
    frozen.epochs = 0;
    const TrainedClassifier c = train_classifier(ds, frozen, 42);
    const MlpModel init = init_mlp({2, 16, 3}, derive_seed(42, 0));
    for (std::size_t l = 0; l < init.num_layers(); ++l) {
        CHECK(c.classifier->model().weights[l] == init.weights[l]);
    }
}

TEST_CASE("predict_proba outputs are valid simplex points for every kind") {
    const auto world = separated_world(5);
    SpecialistSplitTransform split;
    split.good_classes = {0, 1};
    std::vector<std::shared_ptr<const Classifier>> models{
        std::make_shared<AnalyticClassifier>(world),
        std::make_shared<TemperatureClassifier>(world, 3.0),
        std::make_shared<SpecialistClassifier>(world, make_specialist_world(world, split))};
    const Dataset ds = world->sample(200, 31);
    for (const auto& clf : models) {
        for (const auto& ex : ds) {
            const ProbVector p = clf->predict_proba(ex.x);  // validates on construction
            CHECK(p.num_classes() == 5);
        }
    }
}

TEST_CASE("classifier files round-trip predictions bit-exactly") {
    const auto world = separated_world(4);
    const Dataset probe = world->sample(150, 3);
    const auto dir = std::filesystem::temp_directory_path();

    std::vector<std::shared_ptr<const Classifier>> originals;
    originals.push_back(std::make_shared<AnalyticClassifier>(world));
    originals.push_back(std::make_shared<TemperatureClassifier>(world, 2.7));
    SpecialistSplitTransform split;
    split.good_classes = {1, 2};
    originals.push_back(std::make_shared<SpecialistClassifier>(
        world, make_specialist_world(world, split), 0.03, 0.01));
    TrainHyperparams hp;
    hp.hidden_sizes = {8};
    hp.epochs = 3;
    originals.push_back(train_classifier(world->sample(400, 9), hp, 4).classifier);

    for (std::size_t i = 0; i < originals.size(); ++i) {
        const auto path = dir / ("cascadelab_clf_" + std::to_string(i) + ".json");
        save_classifier(*originals[i], path);
        const auto loaded = load_classifier(path);
        REQUIRE(loaded->num_classes() == originals[i]->num_classes());
        for (const auto& ex : probe) {
            const ProbVector a = originals[i]->predict_proba(ex.x);
            const ProbVector b = loaded->predict_proba(ex.x);
            CHECK(a.values() == b.values());
        }
        std::filesystem::remove(path);
    }

    // discrete worlds embed exactly as well
    std::vector<DiscreteWorld::SupportPoint> support;
    support.push_back({{0.25, -1.0}, 0.6, ProbVector({0.7, 0.2, 0.1})});
    support.push_back({{1.5, 2.0}, 0.4, ProbVector({0.1, 0.45, 0.45})});
    const auto discrete = std::make_shared<DiscreteWorld>(support);
    const AnalyticClassifier analytic(discrete);
    const auto path = dir / "cascadelab_clf_discrete.json";
    save_classifier(analytic, path);
    const auto loaded = load_classifier(path);
    for (const auto& pt : support) {
        CHECK(loaded->predict_proba(pt.x).values() == analytic.predict_proba(pt.x).values());
    }
    std::filesystem::remove(path);
}
