#pragma once

#include <cstddef>
#include <vector>

#include "cascadelab/errors.hpp"
#include "cascadelab/rng.hpp"

namespace cascadelab {

/// Fully connected network: affine layers with rectified-linear hidden
/// activations and a linear output. Weights are row-major [out][in],
/// all parameters 64-bit.
struct MlpModel {
    std::vector<int> layer_sizes;               // {input, hidden..., output}
    std::vector<std::vector<double>> weights;   // one block per layer
    std::vector<std::vector<double>> biases;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return weights.size(); }
};

/// Zero-initialized model of the given shape.
MlpModel make_mlp(const std::vector<int>& layer_sizes);

/// Uniform fan-in initialization: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases zero, drawn from the given seed.
MlpModel init_mlp(const std::vector<int>& layer_sizes, RngSeed seed);

/// Gradients (or Adam moments) shaped like a model's parameters.
struct MlpGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void set_zero();
};

MlpGradients make_gradients(const MlpModel& model);

std::vector<double> mlp_forward(const MlpModel& model, const std::vector<double>& input);

/// Per-layer activations retained for the backward pass.
struct MlpForwardCache {
    std::vector<std::vector<double>> activations;  // activations[0] is the input
    std::vector<std::vector<double>> preacts;
};

std::vector<double> mlp_forward_cached(const MlpModel& model, const std::vector<double>& input,
                                       MlpForwardCache& cache);

/// Accumulates exact gradients of the forward map into `accum` given the
/// loss gradient with respect to the raw outputs. The rectifier subgradient
/// at zero is taken as zero.
void mlp_backward(const MlpModel& model, const MlpForwardCache& cache,
                  const std::vector<double>& output_grad, MlpGradients& accum);

/// Adam with bias correction. The L2 weight acts as weight decay in the
/// loss: effective weight gradient = grad + 2*l2*param. Decay applies to
/// weight blocks only, never biases.
struct AdamConfig {
    double learning_rate = 7e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l2 = 0.0;
};

struct OptimizerState {
    AdamConfig config;
    long step_count = 0;
    MlpGradients first_moment;
    MlpGradients second_moment;
};

OptimizerState make_adam_state(const MlpModel& model, const AdamConfig& config);

/// One Adam update over all parameter blocks. Throws
/// TrainingDivergenceError on non-finite gradients.
void adam_step(OptimizerState& state, MlpModel& model, const MlpGradients& grads);

}  // namespace cascadelab
