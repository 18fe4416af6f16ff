#include "fedad/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedad::nn {

namespace {

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::size_t layer_param_count(const LayerSpec& s) {
    return static_cast<std::size_t>(s.out_dim) * static_cast<std::size_t>(s.in_dim) +
           static_cast<std::size_t>(s.out_dim);
}

double apply_activation(Activation act, double z) {
    switch (act) {
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Identity: return z;
    }
    return z;
}

double activation_grad(Activation act, double pre) {
    switch (act) {
    case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: {
        const double s = 1.0 / (1.0 + std::exp(-pre));
        return s * (1.0 - s);
    }
    case Activation::Identity: return 1.0;
    }
    return 1.0;
}

} // namespace

void validate_specs(std::span<const LayerSpec> specs) {
    if (specs.empty()) throw ShapeError("layer stack is empty");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.in_dim < 1 || s.out_dim < 1) {
            throw ShapeError("layer " + std::to_string(i) + ": dimensions must be >= 1");
        }
        if (s.dropout_after < 0.0 || s.dropout_after >= 1.0) {
            throw ShapeError("layer " + std::to_string(i) + ": dropout must be in [0,1)");
        }
        if (i > 0 && specs[i - 1].out_dim != s.in_dim) {
            throw ShapeError("layer " + std::to_string(i) + ": in_dim " + std::to_string(s.in_dim) +
                             " does not match previous out_dim " +
                             std::to_string(specs[i - 1].out_dim));
        }
    }
}

std::size_t param_count(std::span<const LayerSpec> specs) {
    std::size_t n = 0;
    for (const auto& s : specs) n += layer_param_count(s);
    return n;
}

std::vector<ShapeDesc> shapes_for(std::span<const LayerSpec> specs) {
    std::vector<ShapeDesc> shapes;
    shapes.reserve(specs.size());
    for (const auto& s : specs) shapes.push_back({s.out_dim, s.in_dim, true});
    return shapes;
}

void validate_params(const ModelParams& params) {
    std::size_t expected = 0;
    for (const auto& sh : params.shapes) {
        expected += static_cast<std::size_t>(sh.rows) * static_cast<std::size_t>(sh.cols);
        if (sh.has_bias) expected += static_cast<std::size_t>(sh.rows);
    }
    if (params.values.size() != expected) {
        throw ShapeError("parameter vector length " + std::to_string(params.values.size()) +
                         " does not match shape descriptors (" + std::to_string(expected) + ")");
    }
    if (!all_finite(params.values)) throw NumericError("parameter vector contains non-finite values");
}

void init_layer_params(std::span<const LayerSpec> specs, Rng& rng, std::vector<double>& out) {
    for (const auto& s : specs) {
        const double limit = std::sqrt(6.0 / (s.in_dim + s.out_dim));
        for (int i = 0; i < s.out_dim * s.in_dim; ++i) out.push_back(rng.uniform(-limit, limit));
        for (int i = 0; i < s.out_dim; ++i) out.push_back(0.0);
    }
}

Matrix forward(std::span<const double> params, std::span<const LayerSpec> specs,
               const Matrix& batch, bool training, Rng* rng, ForwardCache* cache) {
    validate_specs(specs);
    if (batch.cols != static_cast<std::size_t>(specs.front().in_dim)) {
        throw ShapeError("batch has " + std::to_string(batch.cols) + " columns, first layer expects " +
                         std::to_string(specs.front().in_dim));
    }
    if (params.size() != param_count(specs)) {
        throw ShapeError("parameter span length " + std::to_string(params.size()) +
                         " does not match layer stack (" + std::to_string(param_count(specs)) + ")");
    }
    if (!all_finite({batch.data.data(), batch.data.size()})) {
        throw NumericError("forward: non-finite input");
    }

    if (cache) {
        cache->specs.assign(specs.begin(), specs.end());
        cache->params.assign(params.begin(), params.end());
        cache->inputs.clear();
        cache->preacts.clear();
        cache->masks.clear();
    }

    Matrix x = batch;
    std::size_t offset = 0;
    for (const auto& s : specs) {
        const double* w = params.data() + offset;
        const double* b = w + static_cast<std::size_t>(s.out_dim) * s.in_dim;

        Matrix pre(x.rows, static_cast<std::size_t>(s.out_dim));
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double* xin = x.row(r);
            double* out = pre.row(r);
            for (int j = 0; j < s.out_dim; ++j) {
                const double* wrow = w + static_cast<std::size_t>(j) * s.in_dim;
                double acc = b[j];
                for (int k = 0; k < s.in_dim; ++k) acc += wrow[k] * xin[k];
                out[j] = acc;
            }
        }

        Matrix post(pre.rows, pre.cols);
        for (std::size_t i = 0; i < pre.size(); ++i) {
            post.data[i] = apply_activation(s.activation, pre.data[i]);
        }

        Matrix mask;
        if (s.dropout_after > 0.0 && training) {
            if (!rng) throw NumericError("forward: training dropout requires an rng");
            mask = Matrix(post.rows, post.cols);
            const double keep = 1.0 - s.dropout_after;
            for (std::size_t i = 0; i < mask.size(); ++i) {
                mask.data[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
            }
            for (std::size_t i = 0; i < post.size(); ++i) post.data[i] *= mask.data[i];
        }

        if (cache) {
            cache->inputs.push_back(std::move(x));
            cache->preacts.push_back(std::move(pre));
            cache->masks.push_back(std::move(mask));
        }
        x = std::move(post);
        offset += layer_param_count(s);
    }

    if (cache) cache->output = x;
    return x;
}

Matrix forward(const ModelParams& params, std::span<const LayerSpec> specs, const Matrix& batch,
               bool training, Rng* rng, ForwardCache* cache) {
    validate_params(params);
    return forward(std::span<const double>(params.values), specs, batch, training, rng, cache);
}

double mse_loss(const Matrix& reconstruction, const Matrix& target) {
    require_same_shape(reconstruction, target, "mse_loss");
    if (reconstruction.size() == 0) throw ShapeError("mse_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < reconstruction.size(); ++i) {
        const double d = reconstruction.data[i] - target.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(reconstruction.size());
}

Matrix mse_loss_grad(const Matrix& reconstruction, const Matrix& target) {
    require_same_shape(reconstruction, target, "mse_loss_grad");
    Matrix g(reconstruction.rows, reconstruction.cols);
    const double scale = 2.0 / static_cast<double>(reconstruction.size());
    for (std::size_t i = 0; i < reconstruction.size(); ++i) {
        g.data[i] = scale * (reconstruction.data[i] - target.data[i]);
    }
    return g;
}

BackwardResult backward(const ForwardCache& cache, const Matrix& loss_grad) {
    const auto& specs = cache.specs;
    if (specs.empty() || cache.inputs.size() != specs.size()) {
        throw ShapeError("backward: cache does not match a forward pass");
    }
    require_same_shape(loss_grad, cache.output, "backward");

    BackwardResult result;
    result.param_grad.assign(cache.params.size(), 0.0);

    // offsets of each layer's parameter block
    std::vector<std::size_t> offsets(specs.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        offsets[i] = off;
        off += layer_param_count(specs[i]);
    }
    if (off != cache.params.size()) throw ShapeError("backward: stale cache");

    Matrix grad = loss_grad; // gradient w.r.t. the layer output, walking backwards
    for (std::size_t li = specs.size(); li-- > 0;) {
        const auto& s = specs[li];
        const Matrix& input = cache.inputs[li];
        const Matrix& pre = cache.preacts[li];
        const Matrix& mask = cache.masks[li];

        // through dropout, then activation
        Matrix dpre(grad.rows, grad.cols);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            double g = grad.data[i];
            if (mask.size() != 0) g *= mask.data[i];
            dpre.data[i] = g * activation_grad(s.activation, pre.data[i]);
        }

        const double* w = cache.params.data() + offsets[li];
        double* dw = result.param_grad.data() + offsets[li];
        double* db = dw + static_cast<std::size_t>(s.out_dim) * s.in_dim;

        // dW = dpre^T X, db = column sums of dpre
        for (std::size_t r = 0; r < dpre.rows; ++r) {
            const double* drow = dpre.row(r);
            const double* xin = input.row(r);
            for (int j = 0; j < s.out_dim; ++j) {
                const double dj = drow[j];
                if (dj == 0.0) continue;
                double* dwrow = dw + static_cast<std::size_t>(j) * s.in_dim;
                for (int k = 0; k < s.in_dim; ++k) dwrow[k] += dj * xin[k];
                db[j] += dj;
            }
        }

        // dX = dpre W
        Matrix dinput(input.rows, input.cols, 0.0);
        for (std::size_t r = 0; r < dpre.rows; ++r) {
            const double* drow = dpre.row(r);
            double* dx = dinput.row(r);
            for (int j = 0; j < s.out_dim; ++j) {
                const double dj = drow[j];
                if (dj == 0.0) continue;
                const double* wrow = w + static_cast<std::size_t>(j) * s.in_dim;
                for (int k = 0; k < s.in_dim; ++k) dx[k] += dj * wrow[k];
            }
        }
        grad = std::move(dinput);
    }

    if (!all_finite(result.param_grad)) throw NumericError("backward: non-finite gradient");
    result.input_grad = std::move(grad);
    return result;
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, double lr) {
    if (params.size() != grad.size()) throw ShapeError("adam_step: parameter/gradient length mismatch");
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: state length mismatch");
    }
    if (lr < 0.0 || !std::isfinite(lr)) throw ConfigError("adam_step: learning rate must be nonnegative");
    if (!all_finite(grad)) throw NumericError("adam_step: non-finite gradient");

    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

} // namespace fedad::nn
