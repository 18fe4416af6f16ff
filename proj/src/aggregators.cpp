#include "fedad/aggregators.hpp"

#include <algorithm>
#include <cmath>

namespace fedad {

namespace {

void check_updates(std::span<const RoundUpdate> updates) {
    if (updates.empty()) throw DataError("aggregate: no updates");
    const std::size_t dim = updates.front().params.size();
    for (const auto& u : updates) {
        if (u.params.size() != dim) throw ShapeError("aggregate: update length mismatch");
    }
}

double total_samples(std::span<const RoundUpdate> updates) {
    double total = 0.0;
    for (const auto& u : updates) total += static_cast<double>(u.num_samples);
    if (total <= 0.0) throw DataError("aggregate: zero total samples");
    return total;
}

std::vector<double> weighted_sum(std::span<const RoundUpdate> updates,
                                 std::span<const double> weights) {
    std::vector<double> out(updates.front().params.size(), 0.0);
    for (std::size_t k = 0; k < updates.size(); ++k) {
        const double w = weights[k];
        const auto& p = updates[k].params;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * p[i];
    }
    return out;
}

} // namespace

std::vector<double> fedavg(std::span<const RoundUpdate> updates) {
    check_updates(updates);
    const double total = total_samples(updates);
    std::vector<double> weights(updates.size());
    for (std::size_t k = 0; k < updates.size(); ++k) {
        weights[k] = static_cast<double>(updates[k].num_samples) / total;
    }
    return weighted_sum(updates, weights);
}

std::vector<double> simple_avg(std::span<const RoundUpdate> updates) {
    check_updates(updates);
    std::vector<double> weights(updates.size(), 1.0 / static_cast<double>(updates.size()));
    return weighted_sum(updates, weights);
}

std::vector<double> median_avg(std::span<const RoundUpdate> updates) {
    check_updates(updates);
    const std::size_t dim = updates.front().params.size();
    const std::size_t n = updates.size();
    std::vector<double> out(dim);
    std::vector<double> column(n);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t k = 0; k < n; ++k) column[k] = updates[k].params[i];
        std::sort(column.begin(), column.end());
        out[i] = (n % 2 == 1) ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
    }
    return out;
}

std::vector<double> fednova(std::span<const double> global, std::span<const RoundUpdate> updates) {
    check_updates(updates);
    if (global.size() != updates.front().params.size()) {
        throw ShapeError("fednova: global length mismatch");
    }
    const double total = total_samples(updates);
    for (const auto& u : updates) {
        if (u.local_steps <= 0) throw DataError("fednova: local step count must be positive");
    }
    double tau_eff = 0.0;
    for (const auto& u : updates) {
        tau_eff += static_cast<double>(u.num_samples) / total * static_cast<double>(u.local_steps);
    }
    std::vector<double> out(global.begin(), global.end());
    for (const auto& u : updates) {
        const double coeff = tau_eff * (static_cast<double>(u.num_samples) / total) /
                             static_cast<double>(u.local_steps);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] -= coeff * (global[i] - u.params[i]);
        }
    }
    return out;
}

std::vector<double> fedavgm(std::span<const double> global, std::span<const RoundUpdate> updates,
                            ServerMomentum& state) {
    check_updates(updates);
    if (global.size() != updates.front().params.size()) {
        throw ShapeError("fedavgm: global length mismatch");
    }
    if (state.buffer.size() != global.size()) state.buffer.assign(global.size(), 0.0);
    const std::vector<double> avg = fedavg(updates);
    std::vector<double> out(global.size());
    for (std::size_t i = 0; i < global.size(); ++i) {
        const double delta = global[i] - avg[i];
        state.buffer[i] = state.beta * state.buffer[i] + delta;
        out[i] = global[i] - state.buffer[i];
    }
    return out;
}

std::vector<double> fedopt(std::span<const double> global, std::span<const RoundUpdate> updates,
                           FedOptState& state, FedOptMode mode) {
    check_updates(updates);
    if (global.size() != updates.front().params.size()) {
        throw ShapeError("fedopt: global length mismatch");
    }
    if (state.tau <= 0.0) throw ConfigError("fedopt: tau must be positive");
    if (state.m.size() != global.size()) state.m.assign(global.size(), 0.0);
    if (state.v.size() != global.size()) state.v.assign(global.size(), 0.0);

    const std::vector<double> avg = fedavg(updates);
    std::vector<double> out(global.size());
    for (std::size_t i = 0; i < global.size(); ++i) {
        const double delta = avg[i] - global[i];
        const double d2 = delta * delta;
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * delta;
        switch (mode) {
        case FedOptMode::Adagrad: state.v[i] += d2; break;
        case FedOptMode::Adam: state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * d2; break;
        case FedOptMode::Yogi: {
            const double sign = state.v[i] > d2 ? 1.0 : (state.v[i] < d2 ? -1.0 : 0.0);
            state.v[i] -= (1.0 - state.beta2) * d2 * sign;
            break;
        }
        }
        out[i] = global[i] + state.server_lr * state.m[i] / (std::sqrt(state.v[i]) + state.tau);
    }
    return out;
}

namespace {

class FedAvgAggregator final : public Aggregator {
public:
    std::vector<double> aggregate(std::span<const double>, std::span<const RoundUpdate> u) override {
        return fedavg(u);
    }
    void reset(std::size_t) override {}
    std::string_view id() const override { return "fedavg"; }
};

class SimpleAvgAggregator final : public Aggregator {
public:
    std::vector<double> aggregate(std::span<const double>, std::span<const RoundUpdate> u) override {
        return simple_avg(u);
    }
    void reset(std::size_t) override {}
    std::string_view id() const override { return "simpleavg"; }
};

class MedianAvgAggregator final : public Aggregator {
public:
    std::vector<double> aggregate(std::span<const double>, std::span<const RoundUpdate> u) override {
        return median_avg(u);
    }
    void reset(std::size_t) override {}
    std::string_view id() const override { return "medianavg"; }
};

class FedNovaAggregator final : public Aggregator {
public:
    std::vector<double> aggregate(std::span<const double> g, std::span<const RoundUpdate> u) override {
        return fednova(g, u);
    }
    void reset(std::size_t) override {}
    std::string_view id() const override { return "fednova"; }
};

class FedAvgMAggregator final : public Aggregator {
public:
    explicit FedAvgMAggregator(double beta) { state_.beta = beta; }
    std::vector<double> aggregate(std::span<const double> g, std::span<const RoundUpdate> u) override {
        return fedavgm(g, u, state_);
    }
    void reset(std::size_t n) override { state_.buffer.assign(n, 0.0); }
    std::string_view id() const override { return "fedavgm"; }

private:
    ServerMomentum state_;
};

class FedOptAggregator final : public Aggregator {
public:
    FedOptAggregator(FedOptMode mode, std::string_view name, const AggregatorHyper& h)
        : mode_(mode), name_(name) {
        state_.server_lr = h.server_lr;
        state_.beta1 = h.beta1;
        state_.beta2 = h.beta2;
        state_.tau = h.tau;
    }
    std::vector<double> aggregate(std::span<const double> g, std::span<const RoundUpdate> u) override {
        return fedopt(g, u, state_, mode_);
    }
    void reset(std::size_t n) override {
        state_.m.assign(n, 0.0);
        state_.v.assign(n, 0.0);
    }
    std::string_view id() const override { return name_; }

private:
    FedOptMode mode_;
    std::string name_;
    FedOptState state_;
};

} // namespace

std::unique_ptr<Aggregator> make_aggregator(std::string_view id, const AggregatorHyper& hyper) {
    if (id == "fedavg") return std::make_unique<FedAvgAggregator>();
    if (id == "simpleavg") return std::make_unique<SimpleAvgAggregator>();
    if (id == "medianavg") return std::make_unique<MedianAvgAggregator>();
    if (id == "fednova") return std::make_unique<FedNovaAggregator>();
    if (id == "fedavgm") return std::make_unique<FedAvgMAggregator>(hyper.beta);
    if (id == "fedadagrad") return std::make_unique<FedOptAggregator>(FedOptMode::Adagrad, "fedadagrad", hyper);
    if (id == "fedyogi") return std::make_unique<FedOptAggregator>(FedOptMode::Yogi, "fedyogi", hyper);
    if (id == "fedadam") return std::make_unique<FedOptAggregator>(FedOptMode::Adam, "fedadam", hyper);
    throw ConfigError("unknown aggregator id: " + std::string(id));
}

const std::vector<std::string>& aggregator_ids() {
    static const std::vector<std::string> ids = {"fedavg",  "simpleavg",  "medianavg", "fednova",
                                                 "fedavgm", "fedadagrad", "fedyogi",   "fedadam"};
    return ids;
}

bool is_linear_aggregator(std::string_view id) { return id == "fedavg" || id == "simpleavg"; }

} // namespace fedad
