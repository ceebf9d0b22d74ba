#include "cascadelab/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "cascadelab/base64.hpp"

namespace cascadelab {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json world_to_json(const SyntheticWorld& world) {
    json out;
    if (const auto* discrete = world.as_discrete()) {
        out["kind"] = "discrete";
        out["dim"] = discrete->dim();
        out["num_classes"] = discrete->num_classes();
        std::vector<double> xs, probs, posteriors;
        for (const auto& pt : discrete->support()) {
            xs.insert(xs.end(), pt.x.begin(), pt.x.end());
            probs.push_back(pt.prob);
            posteriors.insert(posteriors.end(), pt.posterior.begin(), pt.posterior.end());
        }
        out["x"] = base64_encode_doubles(xs);
        out["probs"] = base64_encode_doubles(probs);
        out["posteriors"] = base64_encode_doubles(posteriors);
        return out;
    }
    if (const auto* gaussian = dynamic_cast<const GaussianMixtureWorld*>(&world)) {
        out["kind"] = "gaussian-mixture";
        out["dim"] = gaussian->dim();
        std::vector<double> means, stddevs, priors;
        for (const auto& comp : gaussian->components()) {
            means.insert(means.end(), comp.mean.begin(), comp.mean.end());
            stddevs.push_back(comp.stddev);
            priors.push_back(comp.prior);
        }
        out["means"] = base64_encode_doubles(means);
        out["stddevs"] = base64_encode_doubles(stddevs);
        out["priors"] = base64_encode_doubles(priors);
        return out;
    }
    throw ConfigError("cannot serialize this world kind");
}

std::shared_ptr<const SyntheticWorld> world_from_json(const json& doc) {
    const std::string kind = doc.at("kind").get<std::string>();
    const std::size_t dim = doc.at("dim").get<std::size_t>();
    if (kind == "discrete") {
        const auto xs = base64_decode_doubles(doc.at("x").get<std::string>());
        const auto probs = base64_decode_doubles(doc.at("probs").get<std::string>());
        const auto posteriors = base64_decode_doubles(doc.at("posteriors").get<std::string>());
        const std::size_t L = doc.at("num_classes").get<std::size_t>();
        if (xs.size() != probs.size() * dim || posteriors.size() != probs.size() * L) {
            throw ParseError("discrete world blocks have inconsistent sizes");
        }
        std::vector<DiscreteWorld::SupportPoint> support;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            std::vector<double> x(xs.begin() + static_cast<long>(i * dim),
                                  xs.begin() + static_cast<long>((i + 1) * dim));
            std::vector<double> post(posteriors.begin() + static_cast<long>(i * L),
                                     posteriors.begin() + static_cast<long>((i + 1) * L));
            support.push_back({std::move(x), probs[i], ProbVector(std::move(post))});
        }
        return std::make_shared<DiscreteWorld>(std::move(support));
    }
    if (kind == "gaussian-mixture") {
        const auto means = base64_decode_doubles(doc.at("means").get<std::string>());
        const auto stddevs = base64_decode_doubles(doc.at("stddevs").get<std::string>());
        const auto priors = base64_decode_doubles(doc.at("priors").get<std::string>());
        if (means.size() != stddevs.size() * dim || stddevs.size() != priors.size()) {
            throw ParseError("gaussian world blocks have inconsistent sizes");
        }
        std::vector<GaussianMixtureWorld::Component> comps;
        for (std::size_t c = 0; c < priors.size(); ++c) {
            std::vector<double> mean(means.begin() + static_cast<long>(c * dim),
                                     means.begin() + static_cast<long>((c + 1) * dim));
            comps.push_back({std::move(mean), stddevs[c], priors[c]});
        }
        return std::make_shared<GaussianMixtureWorld>(std::move(comps));
    }
    throw ParseError("unknown world kind '" + kind + "' in classifier file");
}

}  // namespace

void save_classifier(const Classifier& classifier, const std::filesystem::path& path) {
    json doc;
    doc["format_version"] = kFormatVersion;
    if (const auto* mlp = dynamic_cast<const MlpClassifier*>(&classifier)) {
        doc["kind"] = "trained-mlp";
        doc["num_classes"] = mlp->num_classes();
        doc["layer_sizes"] = mlp->model().layer_sizes;
        json weights = json::array(), biases = json::array();
        for (const auto& block : mlp->model().weights) {
            weights.push_back(base64_encode_doubles(block));
        }
        for (const auto& block : mlp->model().biases) {
            biases.push_back(base64_encode_doubles(block));
        }
        doc["weights"] = std::move(weights);
        doc["biases"] = std::move(biases);
    } else if (const auto* temp = dynamic_cast<const TemperatureClassifier*>(&classifier)) {
        doc["kind"] = "corrupted-analytic";
        doc["temperature"] = temp->temperature();
        doc["world"] = world_to_json(*temp->world());
    } else if (const auto* spec = dynamic_cast<const SpecialistClassifier*>(&classifier)) {
        doc["kind"] = "specialist-analytic";
        doc["eps_good"] = spec->eps_good();
        doc["eps_bad"] = spec->eps_bad();
        std::vector<int> good;
        for (int c = 0; c < spec->num_classes(); ++c) {
            if (spec->subgroup().is_good_class(c)) good.push_back(c);
        }
        doc["good_classes"] = good;
        doc["world"] = world_to_json(*spec->world());
    } else if (const auto* analytic = dynamic_cast<const AnalyticClassifier*>(&classifier)) {
        doc["kind"] = "analytic";
        doc["world"] = world_to_json(*analytic->world());
    } else {
        throw ConfigError("cannot serialize this classifier kind");
    }

    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::shared_ptr<Classifier> load_classifier(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ParseError("classifier file " + path.string() + ": " + e.what());
    }
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != kFormatVersion) {
            throw ParseError("unsupported classifier format_version " + std::to_string(version));
        }
        const std::string kind = doc.at("kind").get<std::string>();
        if (kind == "trained-mlp") {
            MlpModel model;
            model.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
            for (const auto& block : doc.at("weights")) {
                model.weights.push_back(base64_decode_doubles(block.get<std::string>()));
            }
            for (const auto& block : doc.at("biases")) {
                model.biases.push_back(base64_decode_doubles(block.get<std::string>()));
            }
            return std::make_shared<MlpClassifier>(std::move(model),
                                                   doc.at("num_classes").get<int>());
        }
        if (kind == "analytic") {
            return std::make_shared<AnalyticClassifier>(world_from_json(doc.at("world")));
        }
        if (kind == "corrupted-analytic") {
            return std::make_shared<TemperatureClassifier>(world_from_json(doc.at("world")),
                                                           doc.at("temperature").get<double>());
        }
        if (kind == "specialist-analytic") {
            auto world = world_from_json(doc.at("world"));
            SpecialistSplitTransform split;
            split.good_classes = doc.at("good_classes").get<std::vector<int>>();
            return std::make_shared<SpecialistClassifier>(
                world, make_specialist_world(world, split), doc.at("eps_good").get<double>(),
                doc.at("eps_bad").get<double>());
        }
        throw ParseError("unknown classifier kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ParseError("classifier file " + path.string() + ": " + e.what());
    }
}

}  // namespace cascadelab
