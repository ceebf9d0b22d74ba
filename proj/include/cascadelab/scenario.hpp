#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascadelab/eval.hpp"
#include "cascadelab/rng.hpp"

namespace cascadelab {

/// Runs one config-driven experiment end to end: build the world, apply
/// transforms, sample data, build or train the base models, train the
/// requested post-hoc rules on the held-out split, evaluate every requested
/// rule on the test set, and write curves, calibration, trained models and
/// a run manifest into the output directory. Fully deterministic given the
/// config and seed; nothing is written until the config has validated.
struct ScenarioArtifacts {
    std::filesystem::path out_dir;
    std::vector<std::string> files;
};

ScenarioArtifacts run_scenario(const std::filesystem::path& config_path,
                               std::optional<std::filesystem::path> out_override = std::nullopt,
                               std::optional<RngSeed> seed_override = std::nullopt);

/// Parsed curve rows keyed by rule name, in file order.
std::map<std::string, std::vector<CurvePoint>> load_curves_csv(
    const std::filesystem::path& path);

/// Headline accuracy deltas (B minus A) per rule at deferral rates
/// 0.1 / 0.3 / 0.5, from two run manifests of the same scenario.
std::string compare_report(const std::filesystem::path& manifest_a,
                           const std::filesystem::path& manifest_b);

}  // namespace cascadelab
