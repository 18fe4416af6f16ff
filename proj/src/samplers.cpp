#include "fedad/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedad/errors.hpp"

namespace fedad {

namespace {

void check_pool(std::span<const ClientProfile> clients, double fraction) {
    if (clients.empty()) throw DataError("sampler: empty client pool");
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ConfigError("sampler: fraction must be in (0,1]");
    }
}

// without-replacement draws proportional to weight; zero total weight falls
// back to uniform over the remaining candidates
std::vector<std::string> weighted_without_replacement(std::span<const ClientProfile> clients,
                                                      std::vector<double> weights, std::size_t m,
                                                      Rng& rng) {
    std::vector<std::size_t> remaining(clients.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

    std::vector<std::string> selected;
    selected.reserve(m);
    while (selected.size() < m) {
        double total = 0.0;
        for (std::size_t idx : remaining) total += weights[idx];
        std::size_t pick_pos = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            for (std::size_t p = 0; p < remaining.size(); ++p) {
                r -= weights[remaining[p]];
                if (r < 0.0) {
                    pick_pos = p;
                    break;
                }
                pick_pos = p; // numeric tail guard
            }
        } else {
            pick_pos = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(remaining.size())));
        }
        selected.push_back(clients[remaining[pick_pos]].client_id);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick_pos));
    }
    return selected;
}

} // namespace

std::size_t selection_size(std::size_t n_clients, double fraction) {
    const auto m = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n_clients)));
    return std::clamp<std::size_t>(m, 1, n_clients);
}

std::vector<std::string> random_sample(std::span<const ClientProfile> clients, double fraction,
                                       Rng& rng) {
    check_pool(clients, fraction);
    const std::size_t m = selection_size(clients.size(), fraction);
    std::vector<std::size_t> idx(clients.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    // partial Fisher-Yates
    std::vector<std::string> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(
                               rng.uniform_int(static_cast<std::int64_t>(idx.size() - i)));
        std::swap(idx[i], idx[j]);
        out.push_back(clients[idx[i]].client_id);
    }
    return out;
}

std::vector<std::string> std_sample(std::span<const ClientProfile> clients, double fraction,
                                    Rng& rng) {
    check_pool(clients, fraction);
    const std::size_t m = selection_size(clients.size(), fraction);
    std::vector<double> weights(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (clients[i].feature_std < 0.0) throw DataError("sampler: negative feature std");
        weights[i] = 1.0 / (clients[i].feature_std + 1e-8);
    }
    return weighted_without_replacement(clients, std::move(weights), m, rng);
}

std::vector<std::string> quantity_sample(std::span<const ClientProfile> clients, double fraction,
                                         Rng& rng) {
    check_pool(clients, fraction);
    const std::size_t m = selection_size(clients.size(), fraction);
    std::vector<double> weights(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (clients[i].n_samples < 0) throw DataError("sampler: negative sample count");
        weights[i] = static_cast<double>(clients[i].n_samples);
    }
    return weighted_without_replacement(clients, std::move(weights), m, rng);
}

double client_score(double loss_term, double divergence_term, double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0 || alpha + beta <= 0.0) {
        throw ConfigError("client_score: require alpha, beta >= 0 and alpha + beta > 0");
    }
    return alpha * loss_term + beta * divergence_term;
}

std::vector<double> combined_scores(std::span<const double> loss_sums,
                                    std::span<const double> divergences, double alpha, double beta) {
    if (loss_sums.size() != divergences.size()) {
        throw ShapeError("combined_scores: term length mismatch");
    }
    auto normalized = [](std::span<const double> v) {
        const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
        const double lo = *lo_it, hi = *hi_it;
        std::vector<double> out(v.size(), 0.0);
        if (hi > lo) {
            for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
        }
        return out;
    };
    const std::vector<double> nl = normalized(loss_sums);
    const std::vector<double> nd = normalized(divergences);
    std::vector<double> scores(loss_sums.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = client_score(nl[i], nd[i], alpha, beta);
    }
    return scores;
}

std::vector<std::string> score_sample(std::span<const ClientProfile> clients, double fraction,
                                      int round) {
    check_pool(clients, fraction);
    if (round <= 1) {
        // bootstrap: everyone participates so every client gets a score
        std::vector<std::string> all;
        all.reserve(clients.size());
        for (const auto& c : clients) all.push_back(c.client_id);
        return all;
    }
    const std::size_t m = selection_size(clients.size(), fraction);
    std::vector<std::size_t> order(clients.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        // a missing score sorts first so the client gets selected and scored
        const double sa = clients[a].last_score.value_or(-std::numeric_limits<double>::infinity());
        const double sb = clients[b].last_score.value_or(-std::numeric_limits<double>::infinity());
        if (sa != sb) return sa < sb;
        return clients[a].client_id < clients[b].client_id;
    });
    std::vector<std::string> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.push_back(clients[order[i]].client_id);
    return out;
}

namespace {

class RandomSampler final : public Sampler {
public:
    std::vector<std::string> select(std::span<const ClientProfile> c, double f, int, Rng& rng) override {
        return random_sample(c, f, rng);
    }
    std::string_view id() const override { return "random"; }
};

class StdSampler final : public Sampler {
public:
    std::vector<std::string> select(std::span<const ClientProfile> c, double f, int, Rng& rng) override {
        return std_sample(c, f, rng);
    }
    std::string_view id() const override { return "std"; }
};

class QuantitySampler final : public Sampler {
public:
    std::vector<std::string> select(std::span<const ClientProfile> c, double f, int, Rng& rng) override {
        return quantity_sample(c, f, rng);
    }
    std::string_view id() const override { return "quantity"; }
};

class ScoreSampler final : public Sampler {
public:
    std::vector<std::string> select(std::span<const ClientProfile> c, double f, int round,
                                    Rng&) override {
        return score_sample(c, f, round);
    }
    std::string_view id() const override { return "score"; }
};

} // namespace

std::unique_ptr<Sampler> make_sampler(std::string_view id) {
    if (id == "random") return std::make_unique<RandomSampler>();
    if (id == "std") return std::make_unique<StdSampler>();
    if (id == "quantity") return std::make_unique<QuantitySampler>();
    if (id == "score") return std::make_unique<ScoreSampler>();
    throw ConfigError("unknown sampler id: " + std::string(id));
}

const std::vector<std::string>& sampler_ids() {
    static const std::vector<std::string> ids = {"random", "std", "quantity", "score"};
    return ids;
}

} // namespace fedad
