#pragma once

#include <filesystem>
#include <memory>

#include "cascadelab/models.hpp"

namespace cascadelab {

/// Classifier files: a JSON envelope with a kind tag plus the kind's
/// parameters. Worlds are embedded; every 64-bit parameter array (network
/// weights, means, priors, posteriors) is stored base64 row-major, so a
/// round-trip reproduces predictions bit-exactly.
void save_classifier(const Classifier& classifier, const std::filesystem::path& path);
std::shared_ptr<Classifier> load_classifier(const std::filesystem::path& path);

}  // namespace cascadelab
