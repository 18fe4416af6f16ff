#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedad/matrix.hpp"
#include "fedad/rng.hpp"

namespace fedad::nn {

enum class Activation { ReLU, Sigmoid, Identity };

// One dense layer: y = act(x W^T + b), optionally followed by inverted-scaling
// dropout on the output (active only in training mode).
struct LayerSpec {
    int in_dim = 0;
    int out_dim = 0;
    Activation activation = Activation::Identity;
    double dropout_after = 0.0; // probability in [0, 1)
};

void validate_specs(std::span<const LayerSpec> specs);

struct ShapeDesc {
    int rows = 0; // out_dim
    int cols = 0; // in_dim
    bool has_bias = true;
};

// Flat parameter vector plus its layer-shape descriptors. Layout per layer:
// weight matrix row-major (out x in), then bias (out).
struct ModelParams {
    std::vector<double> values;
    std::vector<ShapeDesc> shapes;
};

std::size_t param_count(std::span<const LayerSpec> specs);
std::vector<ShapeDesc> shapes_for(std::span<const LayerSpec> specs);
void validate_params(const ModelParams& params);

// Xavier-uniform weights, zero biases, appended to `out`.
void init_layer_params(std::span<const LayerSpec> specs, Rng& rng, std::vector<double>& out);

// Everything backward() needs: layer inputs, pre-activations, dropout masks
// and a snapshot of the parameters the pass ran with.
struct ForwardCache {
    std::vector<LayerSpec> specs;
    std::vector<double> params;
    std::vector<Matrix> inputs;
    std::vector<Matrix> preacts;
    std::vector<Matrix> masks; // empty matrix when the layer has no dropout
    Matrix output;
};

// Dropout masks are drawn from `rng` only when training; `rng` may be null
// otherwise. `cache` may be null when no backward pass will follow.
Matrix forward(std::span<const double> params, std::span<const LayerSpec> specs,
               const Matrix& batch, bool training, Rng* rng, ForwardCache* cache = nullptr);

Matrix forward(const ModelParams& params, std::span<const LayerSpec> specs, const Matrix& batch,
               bool training, Rng* rng, ForwardCache* cache = nullptr);

// Mean over all elements of the squared difference.
double mse_loss(const Matrix& reconstruction, const Matrix& target);
Matrix mse_loss_grad(const Matrix& reconstruction, const Matrix& target);

struct BackwardResult {
    std::vector<double> param_grad; // aligned with the forward parameter span
    Matrix input_grad;              // gradient w.r.t. the batch input
};

BackwardResult backward(const ForwardCache& cache, const Matrix& loss_grad);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Standard bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, double lr);

} // namespace fedad::nn
