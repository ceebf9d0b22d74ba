#include "cascadelab/mlp.hpp"

#include <cmath>
#include <string>

namespace cascadelab {

static void check_shape(const std::vector<int>& layer_sizes) {
    if (layer_sizes.size() < 2) throw ShapeError("MLP needs at least input and output sizes");
    for (int s : layer_sizes) {
        if (s <= 0) throw ShapeError("MLP layer size must be positive, got " + std::to_string(s));
    }
}

MlpModel make_mlp(const std::vector<int>& layer_sizes) {
    check_shape(layer_sizes);
    MlpModel m;
    m.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = static_cast<std::size_t>(layer_sizes[l]);
        const std::size_t fan_out = static_cast<std::size_t>(layer_sizes[l + 1]);
        m.weights.emplace_back(fan_in * fan_out, 0.0);
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

MlpModel init_mlp(const std::vector<int>& layer_sizes, RngSeed seed) {
    MlpModel m = make_mlp(layer_sizes);
    Rng rng(seed);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.layer_sizes[l]));
        for (double& w : m.weights[l]) {
            w = (2.0 * rng.next_double() - 1.0) * bound;
        }
    }
    return m;
}

void MlpGradients::set_zero() {
    for (auto& block : weights) std::fill(block.begin(), block.end(), 0.0);
    for (auto& block : biases) std::fill(block.begin(), block.end(), 0.0);
}

MlpGradients make_gradients(const MlpModel& model) {
    MlpGradients g;
    for (const auto& block : model.weights) g.weights.emplace_back(block.size(), 0.0);
    for (const auto& block : model.biases) g.biases.emplace_back(block.size(), 0.0);
    return g;
}

std::vector<double> mlp_forward(const MlpModel& model, const std::vector<double>& input) {
    MlpForwardCache cache;
    return mlp_forward_cached(model, input, cache);
}

std::vector<double> mlp_forward_cached(const MlpModel& model, const std::vector<double>& input,
                                       MlpForwardCache& cache) {
    if (static_cast<int>(input.size()) != model.input_dim()) {
        throw ShapeError("MLP input dim " + std::to_string(input.size()) + ", expected " +
                         std::to_string(model.input_dim()));
    }
    cache.activations.assign(1, input);
    cache.preacts.clear();
    std::vector<double> current = input;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const int in_dim = model.layer_sizes[l];
        const int out_dim = model.layer_sizes[l + 1];
        std::vector<double> z(model.biases[l]);
        const double* w = model.weights[l].data();
        for (int o = 0; o < out_dim; ++o) {
            double acc = 0.0;
            const double* row = w + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) acc += row[i] * current[i];
            z[o] += acc;
        }
        cache.preacts.push_back(z);
        if (l + 1 < model.num_layers()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        }
        cache.activations.push_back(z);
        current = std::move(z);
    }
    return current;
}

void mlp_backward(const MlpModel& model, const MlpForwardCache& cache,
                  const std::vector<double>& output_grad, MlpGradients& accum) {
    if (output_grad.size() != static_cast<std::size_t>(model.output_dim())) {
        throw ShapeError("output gradient dim mismatch");
    }
    if (cache.activations.size() != model.num_layers() + 1) {
        throw ShapeError("forward cache does not match model");
    }
    std::vector<double> delta = output_grad;
    for (std::size_t l = model.num_layers(); l-- > 0;) {
        const int in_dim = model.layer_sizes[l];
        const int out_dim = model.layer_sizes[l + 1];
        const std::vector<double>& a_in = cache.activations[l];
        double* gw = accum.weights[l].data();
        for (int o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            accum.biases[l][o] += d;
            double* row = gw + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) row[i] += d * a_in[i];
        }
        if (l == 0) break;
        std::vector<double> next_delta(in_dim, 0.0);
        const double* w = model.weights[l].data();
        for (int o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            const double* row = w + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) next_delta[i] += row[i] * d;
        }
        // rectifier subgradient: 0 at z == 0
        const std::vector<double>& z_prev = cache.preacts[l - 1];
        for (int i = 0; i < in_dim; ++i) {
            if (!(z_prev[i] > 0.0)) next_delta[i] = 0.0;
        }
        delta = std::move(next_delta);
    }
}

OptimizerState make_adam_state(const MlpModel& model, const AdamConfig& config) {
    OptimizerState state;
    state.config = config;
    state.first_moment = make_gradients(model);
    state.second_moment = make_gradients(model);
    return state;
}

static void adam_update_block(const AdamConfig& cfg, long t, std::vector<double>& param,
                              const std::vector<double>& grad, std::vector<double>& m,
                              std::vector<double>& v, double decay) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = grad[i] + 2.0 * decay * param[i];
        if (!std::isfinite(g)) {
            throw TrainingDivergenceError("non-finite gradient in Adam step");
        }
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

void adam_step(OptimizerState& state, MlpModel& model, const MlpGradients& grads) {
    if (grads.weights.size() != model.num_layers()) throw ShapeError("gradient/model mismatch");
    state.step_count += 1;
    const AdamConfig& cfg = state.config;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        adam_update_block(cfg, state.step_count, model.weights[l], grads.weights[l],
                          state.first_moment.weights[l], state.second_moment.weights[l], cfg.l2);
        adam_update_block(cfg, state.step_count, model.biases[l], grads.biases[l],
                          state.first_moment.biases[l], state.second_moment.biases[l], 0.0);
    }
}

}  // namespace cascadelab
