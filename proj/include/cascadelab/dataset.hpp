#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cascadelab/errors.hpp"

namespace cascadelab {

/// One labeled instance: a real feature vector and a class index in [0, L).
struct LabeledExample {
    std::vector<double> x;
    int y = 0;
};

/// An ordered, immutable collection of examples sharing a class count and a
/// feature dimension. Iteration order is the construction order.
class Dataset {
public:
    Dataset(std::vector<LabeledExample> examples, int num_classes)
        : examples_(std::move(examples)), num_classes_(num_classes) {
        if (examples_.empty()) throw ConfigError("Dataset must be nonempty");
        if (num_classes_ < 2) throw ConfigError("Dataset needs at least 2 classes");
        const std::size_t dim = examples_.front().x.size();
        for (const auto& ex : examples_) {
            if (ex.x.size() != dim) {
                throw ShapeError("Dataset feature dimensions differ: " + std::to_string(dim) +
                                 " vs " + std::to_string(ex.x.size()));
            }
            if (ex.y < 0 || ex.y >= num_classes_) {
                throw ConfigError("Dataset label " + std::to_string(ex.y) + " outside [0, " +
                                  std::to_string(num_classes_) + ")");
            }
        }
    }

    std::size_t size() const { return examples_.size(); }
    int num_classes() const { return num_classes_; }
    std::size_t feature_dim() const { return examples_.front().x.size(); }
    const LabeledExample& operator[](std::size_t i) const { return examples_[i]; }
    const std::vector<LabeledExample>& examples() const { return examples_; }

    auto begin() const { return examples_.begin(); }
    auto end() const { return examples_.end(); }

private:
    std::vector<LabeledExample> examples_;
    int num_classes_;
};

/// CSV on-disk format: header `f0,...,f{d-1},label`, UTF-8, '.' decimal
/// separator, 0-based integer labels. Doubles are written shortest
/// round-trip so write/read is value-exact.
void write_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset read_csv(const std::filesystem::path& path, int num_classes);

/// Shortest round-trip decimal form of a double (used by every CSV writer
/// in the library so outputs are byte-deterministic).
std::string format_double(double value);

}  // namespace cascadelab
