#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedad/nn.hpp"

using namespace fedad;
using nn::Activation;
using nn::LayerSpec;

namespace {

// identity weight matrix, zero bias
std::vector<double> identity_params(int dim) {
    std::vector<double> p(static_cast<std::size_t>(dim) * dim + dim, 0.0);
    for (int i = 0; i < dim; ++i) p[static_cast<std::size_t>(i) * dim + i] = 1.0;
    return p;
}

Matrix make_batch(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

// central finite differences over a scalar forward+MSE objective; every
// evaluation re-seeds the rng so dropout masks are identical
double fd_loss(std::vector<double> params, std::span<const LayerSpec> specs, const Matrix& batch,
               const Matrix& target, bool training, std::uint64_t mask_seed) {
    Rng rng(mask_seed);
    const Matrix out = nn::forward(params, specs, batch, training, training ? &rng : nullptr);
    return nn::mse_loss(out, target);
}

// relative error with a floor that keeps near-zero coordinates honest
double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-2); }

void check_gradients(std::span<const LayerSpec> specs, std::uint64_t seed, bool training) {
    Rng init(seed);
    std::vector<double> params;
    nn::init_layer_params(specs, init, params);
    // nonzero init biases so their gradients are exercised off the origin
    for (auto& p : params) {
        if (p == 0.0) p = init.uniform(-0.1, 0.1);
    }

    const std::size_t batch_rows = 3;
    Matrix batch(batch_rows, static_cast<std::size_t>(specs.front().in_dim));
    Matrix target(batch_rows, static_cast<std::size_t>(specs.back().out_dim));
    for (auto& v : batch.data) v = init.uniform(0.05, 0.95);
    for (auto& v : target.data) v = init.uniform(0.05, 0.95);

    const std::uint64_t mask_seed = seed ^ 0xabcdef;
    nn::ForwardCache cache;
    Rng fwd_rng(mask_seed);
    const Matrix out = nn::forward(params, specs, batch, training, training ? &fwd_rng : nullptr, &cache);
    const auto analytic = nn::backward(cache, nn::mse_loss_grad(out, target));

    const double h = 1e-4;
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<double> plus = params, minus = params;
        plus[i] += h;
        minus[i] -= h;
        const double fd = (fd_loss(plus, specs, batch, target, training, mask_seed) -
                           fd_loss(minus, specs, batch, target, training, mask_seed)) /
                          (2.0 * h);
        CAPTURE(i);
        CHECK(rel_err(analytic.param_grad[i], fd) < 1e-4);
    }
}

} // namespace

TEST_CASE("forward: identity layer reproduces its input") {
    const LayerSpec spec{3, 3, Activation::Identity, 0.0};
    const auto params = identity_params(3);
    const Matrix x = make_batch({{0.1, -2.0, 3.5}, {0.0, 1.0, 2.0}});
    const Matrix y = nn::forward(params, {&spec, 1}, x, false, nullptr);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("forward: sigmoid of zero pre-activation is 0.5") {
    const LayerSpec spec{2, 4, Activation::Sigmoid, 0.0};
    const std::vector<double> params(2 * 4 + 4, 0.0);
    const Matrix x = make_batch({{0.3, 0.9}});
    const Matrix y = nn::forward(params, {&spec, 1}, x, false, nullptr);
    for (double v : y.data) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("forward: dropout is disabled in evaluation mode") {
    LayerSpec with_dropout{3, 5, Activation::ReLU, 0.5};
    LayerSpec without{3, 5, Activation::ReLU, 0.0};
    Rng init(11);
    std::vector<double> params;
    nn::init_layer_params({&with_dropout, 1}, init, params);
    const Matrix x = make_batch({{0.2, 0.8, 0.5}, {0.9, 0.1, 0.4}});
    const Matrix a = nn::forward(params, {&with_dropout, 1}, x, false, nullptr);
    const Matrix b = nn::forward(params, {&without, 1}, x, false, nullptr);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("forward: inverted dropout preserves the expected activation") {
    const LayerSpec spec{2, 3, Activation::Identity, 0.5};
    Rng init(5);
    std::vector<double> params;
    nn::init_layer_params({&spec, 1}, init, params);
    const Matrix x = make_batch({{0.7, 0.3}});
    const Matrix reference = nn::forward(params, {&spec, 1}, x, false, nullptr);

    Rng mask_rng(99);
    Matrix mean(1, 3, 0.0);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        const Matrix y = nn::forward(params, {&spec, 1}, x, true, &mask_rng);
        for (std::size_t i = 0; i < y.size(); ++i) mean.data[i] += y.data[i];
    }
    for (std::size_t i = 0; i < mean.size(); ++i) {
        mean.data[i] /= draws;
        CHECK(mean.data[i] == doctest::Approx(reference.data[i]).epsilon(0.02));
    }
}

TEST_CASE("forward: shape and finiteness errors") {
    const LayerSpec spec{3, 2, Activation::Identity, 0.0};
    std::vector<double> params(3 * 2 + 2, 0.1);
    const Matrix wrong = make_batch({{1.0, 2.0}});
    CHECK_THROWS_AS(nn::forward(params, {&spec, 1}, wrong, false, nullptr), ShapeError);
    Matrix bad = make_batch({{1.0, 2.0, std::nan("")}});
    CHECK_THROWS_AS(nn::forward(params, {&spec, 1}, bad, false, nullptr), NumericError);
}

TEST_CASE("mse_loss: basic values and elementwise oracle") {
    const Matrix a = make_batch({{1.0, 1.0}});
    const Matrix b = make_batch({{0.0, 0.0}});
    CHECK(nn::mse_loss(a, a) == 0.0);
    CHECK(nn::mse_loss(a, b) == doctest::Approx(1.0));
    CHECK_THROWS_AS(nn::mse_loss(a, make_batch({{1.0, 2.0, 3.0}})), ShapeError);

    Rng rng(17);
    Matrix x(4, 7), y(4, 7);
    for (auto& v : x.data) v = rng.uniform(-2, 2);
    for (auto& v : y.data) v = rng.uniform(-2, 2);
    double manual = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        manual += (x.data[i] - y.data[i]) * (x.data[i] - y.data[i]);
    }
    manual /= static_cast<double>(x.size());
    CHECK(std::abs(nn::mse_loss(x, y) - manual) < 1e-12);
}

TEST_CASE("backward: zero loss gradient gives zero parameter gradient") {
    const LayerSpec spec{2, 2, Activation::Sigmoid, 0.0};
    Rng init(3);
    std::vector<double> params;
    nn::init_layer_params({&spec, 1}, init, params);
    nn::ForwardCache cache;
    const Matrix x = make_batch({{0.4, 0.6}});
    nn::forward(params, {&spec, 1}, x, false, nullptr, &cache);
    const auto result = nn::backward(cache, Matrix(1, 2, 0.0));
    for (double g : result.param_grad) CHECK(g == 0.0);
}

TEST_CASE("backward: closed-form scalar chain rule") {
    // y = w x, L = (y - t)^2 => dL/dw = 2 (w x - t) x; w=1, x=2, t=0 -> 8
    const LayerSpec spec{1, 1, Activation::Identity, 0.0};
    const std::vector<double> params = {1.0, 0.0};
    nn::ForwardCache cache;
    const Matrix x = make_batch({{2.0}});
    const Matrix y = nn::forward(params, {&spec, 1}, x, false, nullptr, &cache);
    const Matrix target = make_batch({{0.0}});
    const auto result = nn::backward(cache, nn::mse_loss_grad(y, target));
    CHECK(result.param_grad[0] == doctest::Approx(8.0));
    CHECK(result.param_grad[1] == doctest::Approx(4.0)); // dL/db = 2(wx - t)
}

TEST_CASE("backward: finite-difference oracle over random stacks") {
    const std::vector<LayerSpec> two_layer = {{4, 8, Activation::ReLU, 0.0},
                                              {8, 4, Activation::Sigmoid, 0.0}};
    check_gradients(two_layer, 101, false);

    const std::vector<LayerSpec> three_layer = {{5, 6, Activation::ReLU, 0.0},
                                                {6, 6, Activation::Identity, 0.0},
                                                {6, 5, Activation::Sigmoid, 0.0}};
    check_gradients(three_layer, 202, false);

    // dropout active: masks pinned by re-seeding each evaluation
    const std::vector<LayerSpec> dropped = {{4, 6, Activation::ReLU, 0.3},
                                            {6, 4, Activation::Sigmoid, 0.0}};
    check_gradients(dropped, 303, true);
}

TEST_CASE("backward: mismatched cache is rejected") {
    const LayerSpec spec{2, 3, Activation::Identity, 0.0};
    std::vector<double> params(2 * 3 + 3, 0.1);
    nn::ForwardCache cache;
    nn::forward(params, {&spec, 1}, make_batch({{0.1, 0.2}}), false, nullptr, &cache);
    CHECK_THROWS_AS(nn::backward(cache, Matrix(1, 2, 1.0)), ShapeError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    std::vector<double> params = {1.0, -2.0, 3.0};
    nn::AdamState state(3);
    const std::vector<double> grad(3, 0.0);
    nn::adam_step(params, grad, state, 0.01);
    CHECK(params[0] == 1.0);
    CHECK(params[1] == -2.0);
    CHECK(params[2] == 3.0);
    CHECK(state.step_count == 1);
}

TEST_CASE("adam: first step moves each coordinate by about lr") {
    // bias correction makes m_hat = g and v_hat = g^2, so the step is
    // lr * g / (|g| + eps)
    std::vector<double> params = {0.5, 0.5};
    nn::AdamState state(2);
    const std::vector<double> grad = {3.0, 3.0};
    const double lr = 0.001;
    nn::adam_step(params, grad, state, lr);
    for (double p : params) CHECK(std::abs((0.5 - p) - lr) < lr * 1e-6);
}

TEST_CASE("adam: two steps match the hand-unrolled recurrence") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> params = {1.0};
    nn::AdamState state(1);
    nn::adam_step(params, std::vector<double>{1.0}, state, lr);
    nn::adam_step(params, std::vector<double>{1.0}, state, lr);

    // manual unroll with g = 1 both steps
    double m = 0.0, v = 0.0, p = 1.0;
    for (int t = 1; t <= 2; ++t) {
        m = b1 * m + (1 - b1) * 1.0;
        v = b2 * v + (1 - b2) * 1.0;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        p -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    CHECK(std::abs(params[0] - p) < 1e-12);
    CHECK(state.step_count == 2);
}

TEST_CASE("adam: lr zero never changes parameters") {
    Rng rng(7);
    std::vector<double> params(10);
    std::vector<double> grad(10);
    for (auto& v : params) v = rng.uniform(-1, 1);
    for (auto& v : grad) v = rng.uniform(-1, 1);
    const auto before = params;
    nn::AdamState state(10);
    for (int i = 0; i < 5; ++i) nn::adam_step(params, grad, state, 0.0);
    CHECK(params == before);
}

TEST_CASE("adam: non-finite gradient is rejected") {
    std::vector<double> params = {1.0};
    nn::AdamState state(1);
    CHECK_THROWS_AS(
        nn::adam_step(params, std::vector<double>{std::nan("")}, state, 0.01), NumericError);
}

TEST_CASE("determinism: same seed gives bit-identical training trajectories") {
    const std::vector<LayerSpec> specs = {{4, 8, Activation::ReLU, 0.2},
                                          {8, 4, Activation::Sigmoid, 0.0}};
    auto run = [&](std::uint64_t seed) {
        Rng rng(seed);
        std::vector<double> params;
        nn::init_layer_params(specs, rng, params);
        nn::AdamState state(params.size());
        Matrix batch(6, 4);
        for (auto& v : batch.data) v = rng.uniform(0, 1);
        for (int step = 0; step < 20; ++step) {
            nn::ForwardCache cache;
            const Matrix out = nn::forward(params, specs, batch, true, &rng, &cache);
            const auto back = nn::backward(cache, nn::mse_loss_grad(out, batch));
            nn::adam_step(params, back.param_grad, state, 0.001);
        }
        return params;
    };
    CHECK(run(42) == run(42));
    CHECK(run(42) != run(43));
}

TEST_CASE("param_count and shapes match the layout") {
    const std::vector<LayerSpec> specs = {{3, 4, Activation::ReLU, 0.0},
                                          {4, 2, Activation::Identity, 0.0}};
    CHECK(nn::param_count(specs) == 3 * 4 + 4 + 4 * 2 + 2);
    const auto shapes = nn::shapes_for(specs);
    REQUIRE(shapes.size() == 2);
    CHECK(shapes[0].rows == 4);
    CHECK(shapes[0].cols == 3);
    CHECK(shapes[1].rows == 2);
    CHECK(shapes[1].cols == 4);

    nn::ModelParams mp;
    mp.shapes = shapes;
    mp.values.assign(nn::param_count(specs), 0.5);
    CHECK_NOTHROW(nn::validate_params(mp));
    mp.values.pop_back();
    CHECK_THROWS_AS(nn::validate_params(mp), ShapeError);
}
