// Python bindings for the main cascadelab operations.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cascadelab/deferral.hpp"
#include "cascadelab/eval.hpp"
#include "cascadelab/model_io.hpp"
#include "cascadelab/models.hpp"
#include "cascadelab/posthoc.hpp"
#include "cascadelab/prob.hpp"
#include "cascadelab/scenario.hpp"
#include "cascadelab/worlds.hpp"

namespace py = pybind11;
using namespace cascadelab;

namespace {

ProbVector to_prob(const std::vector<double>& values) { return ProbVector(values); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "cascade deferral toolkit";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<InvalidDistributionError>(m, "InvalidDistributionError",
                                                     PyExc_ValueError);
    py::register_exception<OutOfSupportError>(m, "OutOfSupportError", PyExc_ValueError);

    // core operations on probability vectors
    m.def("argmax_label", [](const std::vector<double>& p) { return argmax_label(to_prob(p)); });
    m.def("entropy", [](const std::vector<double>& p) { return entropy(to_prob(p)); });
    m.def("normalize",
          [](const std::vector<double>& raw) { return normalize(raw).values(); });

    py::class_<LabeledExample>(m, "LabeledExample")
        .def_readonly("x", &LabeledExample::x)
        .def_readonly("y", &LabeledExample::y);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<std::vector<LabeledExample>, int>())
        .def("__len__", &Dataset::size)
        .def("__getitem__",
             [](const Dataset& ds, std::size_t i) {
                 if (i >= ds.size()) throw py::index_error();
                 return ds[i];
             })
        .def_property_readonly("num_classes", &Dataset::num_classes);

    py::class_<SyntheticWorld, std::shared_ptr<SyntheticWorld>>(m, "SyntheticWorld")
        .def("posterior",
             [](const SyntheticWorld& w, const std::vector<double>& x) {
                 return w.posterior(x).values();
             })
        .def("sample", &SyntheticWorld::sample, py::arg("n"), py::arg("seed"))
        .def("class_marginals",
             [](const SyntheticWorld& w) { return w.class_marginals().values(); })
        .def_property_readonly("num_classes", &SyntheticWorld::num_classes);

    m.def("gaussian_mixture_world",
          [](const std::vector<std::vector<double>>& means, const std::vector<double>& stddevs,
             const std::vector<double>& priors) -> std::shared_ptr<SyntheticWorld> {
              if (means.size() != stddevs.size() || means.size() != priors.size()) {
                  throw ConfigError("means/stddevs/priors lengths differ");
              }
              std::vector<GaussianMixtureWorld::Component> comps;
              for (std::size_t c = 0; c < means.size(); ++c) {
                  comps.push_back({means[c], stddevs[c], priors[c]});
              }
              return std::make_shared<GaussianMixtureWorld>(std::move(comps));
          },
          py::arg("means"), py::arg("stddevs"), py::arg("priors"));

    m.def("discrete_world",
          [](const std::vector<std::tuple<std::vector<double>, double, std::vector<double>>>&
                 support) -> std::shared_ptr<SyntheticWorld> {
              std::vector<DiscreteWorld::SupportPoint> points;
              for (const auto& [x, prob, posterior] : support) {
                  points.push_back({x, prob, ProbVector(posterior)});
              }
              return std::make_shared<DiscreteWorld>(std::move(points));
          },
          py::arg("support"));

    py::class_<Classifier, std::shared_ptr<Classifier>>(m, "Classifier")
        .def("predict_proba",
             [](const Classifier& c, const std::vector<double>& x) {
                 return c.predict_proba(x).values();
             })
        .def("predict", &Classifier::predict)
        .def_property_readonly("num_classes", &Classifier::num_classes);

    m.def("analytic_classifier",
          [](std::shared_ptr<SyntheticWorld> world) -> std::shared_ptr<Classifier> {
              return std::make_shared<AnalyticClassifier>(std::move(world));
          });
    m.def("temperature_classifier",
          [](std::shared_ptr<SyntheticWorld> world, double tau) -> std::shared_ptr<Classifier> {
              return std::make_shared<TemperatureClassifier>(std::move(world), tau);
          },
          py::arg("world"), py::arg("temperature"));
    m.def("train_classifier",
          [](const Dataset& ds, const std::vector<int>& hidden, int epochs, double learning_rate,
             std::uint64_t seed) -> std::shared_ptr<Classifier> {
              TrainHyperparams hp;
              hp.hidden_sizes = hidden;
              hp.epochs = epochs;
              hp.learning_rate = learning_rate;
              return train_classifier(ds, hp, seed).classifier;
          },
          py::arg("dataset"), py::arg("hidden"), py::arg("epochs"), py::arg("learning_rate"),
          py::arg("seed"));

    // deferral scores
    m.def("score_confidence",
          [](const std::vector<double>& p1) { return score_confidence(to_prob(p1)); });
    m.def("score_entropy",
          [](const std::vector<double>& p1) { return score_entropy(to_prob(p1)); });
    m.def("score_bayes", [](const std::vector<double>& eta, int h1, int h2) {
        return score_bayes(to_prob(eta), h1, h2);
    });
    m.def("score_onehot_oracle", &score_onehot_oracle, py::arg("y"), py::arg("h1"), py::arg("h2"));
    m.def("score_prob_oracle",
          [](const std::vector<double>& p1, const std::vector<double>& p2, int y) {
              return score_prob_oracle(to_prob(p1), to_prob(p2), y);
          });
    m.def("score_relative_confidence",
          [](const std::vector<double>& p1, const std::vector<double>& p2) {
              return score_relative_confidence(to_prob(p1), to_prob(p2));
          });
    m.def("optimal_selector", &optimal_selector, py::arg("error_probs"), py::arg("costs"));

    m.def("extract_features",
          [](const std::vector<double>& p1) { return extract_features(to_prob(p1)); });

    m.def("save_classifier",
          [](std::shared_ptr<Classifier> clf, const std::filesystem::path& path) {
              save_classifier(*clf, path);
          },
          py::arg("classifier"), py::arg("path"));
    m.def("load_classifier",
          [](const std::filesystem::path& path) -> std::shared_ptr<Classifier> {
              return load_classifier(path);
          },
          py::arg("path"));

    py::class_<CurvePoint>(m, "CurvePoint")
        .def_readonly("deferral_rate", &CurvePoint::deferral_rate)
        .def_readonly("accuracy", &CurvePoint::accuracy)
        .def_readonly("risk", &CurvePoint::risk)
        .def_readonly("threshold", &CurvePoint::threshold);

    m.def("deferral_curve",
          [](const Dataset& ds, std::shared_ptr<Classifier> m1, std::shared_ptr<Classifier> m2,
             const std::string& rule_name, const std::vector<double>& rate_grid,
             std::shared_ptr<SyntheticWorld> world, std::uint64_t seed) {
              std::shared_ptr<DeferralRule> rule;
              if (rule_name == "confidence") rule = make_confidence_rule();
              else if (rule_name == "entropy") rule = make_entropy_rule();
              else if (rule_name == "random") rule = make_random_rule(seed);
              else if (rule_name == "oracle-onehot") rule = make_onehot_oracle_rule();
              else if (rule_name == "oracle-prob") rule = make_prob_oracle_rule();
              else if (rule_name == "oracle-relative") rule = make_relative_confidence_rule();
              else if (rule_name == "bayes") rule = make_bayes_rule();
              else throw ConfigError("unknown rule '" + rule_name + "'");
              return deferral_curve(ds, *m1, *m2, *rule, rate_grid, world.get()).points;
          },
          py::arg("dataset"), py::arg("model1"), py::arg("model2"), py::arg("rule"),
          py::arg("rate_grid"), py::arg("world") = nullptr, py::arg("seed") = 0);

    m.def("run_scenario",
          [](const std::filesystem::path& config, std::optional<std::filesystem::path> out,
             std::optional<std::uint64_t> seed) {
              const auto artifacts = run_scenario(config, std::move(out), seed);
              return py::make_tuple(artifacts.out_dir, artifacts.files);
          },
          py::arg("config"), py::arg("out") = std::nullopt, py::arg("seed") = std::nullopt);
}
