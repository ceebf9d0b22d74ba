#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cascadelab/errors.hpp"

namespace cascadelab {

/// Tolerance for the simplex sum check on every ProbVector.
inline constexpr double kProbSumTolerance = 1e-9;

/// A point on the probability simplex over L >= 2 classes.
///
/// Validated on construction: entries in [0, 1], sum within 1e-9 of one.
/// Immutable after construction.
class ProbVector {
public:
    explicit ProbVector(std::vector<double> values) : values_(std::move(values)) {
        validate();
    }

    std::size_t num_classes() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

    auto begin() const { return values_.begin(); }
    auto end() const { return values_.end(); }

private:
    void validate() const {
        if (values_.size() < 2) {
            throw InvalidDistributionError("ProbVector needs at least 2 classes, got " +
                                           std::to_string(values_.size()));
        }
        double sum = 0.0;
        for (double v : values_) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw InvalidDistributionError("ProbVector entry out of [0,1]: " +
                                               std::to_string(v));
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > kProbSumTolerance) {
            throw InvalidDistributionError("ProbVector entries sum to " + std::to_string(sum));
        }
    }

    std::vector<double> values_;
};

/// Index of the maximum entry; ties broken by lowest index.
inline int argmax_label(const ProbVector& p) {
    int best = 0;
    for (std::size_t i = 1; i < p.num_classes(); ++i) {
        if (p[i] > p[best]) best = static_cast<int>(i);
    }
    return best;
}

inline int argmax_index(const std::vector<double>& values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = static_cast<int>(i);
    }
    return best;
}

/// Shannon entropy in nats, with 0*ln(0) = 0.
inline double entropy(const ProbVector& p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

/// Scale a nonnegative vector to the simplex. Throws when no entry is
/// strictly positive or any entry is negative.
inline ProbVector normalize(const std::vector<double>& raw) {
    double sum = 0.0;
    for (double v : raw) {
        if (v < 0.0) {
            throw InvalidDistributionError("normalize: negative entry " + std::to_string(v));
        }
        sum += v;
    }
    if (!(sum > 0.0)) {
        throw InvalidDistributionError("normalize: no strictly positive entry");
    }
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / sum;
    // Guard against residual rounding so the constructed vector always
    // passes the simplex check.
    double check = 0.0;
    for (double v : out) check += v;
    if (check != 1.0) {
        for (double& v : out) v /= check;
    }
    return ProbVector(std::move(out));
}

}  // namespace cascadelab
