#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedad/errors.hpp"

namespace fedad {

// One client's post-training contribution for a round.
struct RoundUpdate {
    std::string client_id;
    std::vector<double> params;
    long num_samples = 0;
    long local_steps = 0;
    double train_loss_sum = 0.0;
};

// w' = sum_k (n_k / sum n) w_k
std::vector<double> fedavg(std::span<const RoundUpdate> updates);

// unweighted coordinate mean
std::vector<double> simple_avg(std::span<const RoundUpdate> updates);

// coordinate-wise median; even count takes the midpoint of the middle two
std::vector<double> median_avg(std::span<const RoundUpdate> updates);

// normalized averaging: d_k = (w - w_k)/tau_k, tau_eff = sum p_k tau_k,
// w' = w - tau_eff sum p_k d_k with p_k = n_k / sum n
std::vector<double> fednova(std::span<const double> global, std::span<const RoundUpdate> updates);

struct ServerMomentum {
    std::vector<double> buffer;
    double beta = 0.9;
};

// delta = w - fedavg(updates); v' = beta v + delta; w' = w - v'
std::vector<double> fedavgm(std::span<const double> global, std::span<const RoundUpdate> updates,
                            ServerMomentum& state);

enum class FedOptMode { Adagrad, Yogi, Adam };

struct FedOptState {
    std::vector<double> m;
    std::vector<double> v;
    double server_lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double tau = 1e-3;
};

// server-side adaptive step on delta = fedavg(updates) - w
std::vector<double> fedopt(std::span<const double> global, std::span<const RoundUpdate> updates,
                           FedOptState& state, FedOptMode mode);

struct AggregatorHyper {
    double beta = 0.9;      // FedAvgM momentum
    double server_lr = 0.01; // FedOpt family
    double beta1 = 0.9;
    double beta2 = 0.99;
    double tau = 1e-3;
};

// Stateful server-side rule; state persists across rounds and is reset at
// experiment start.
class Aggregator {
public:
    virtual ~Aggregator() = default;
    virtual std::vector<double> aggregate(std::span<const double> global,
                                          std::span<const RoundUpdate> updates) = 0;
    virtual void reset(std::size_t param_count) = 0;
    virtual std::string_view id() const = 0;
};

// ids: fedavg, simpleavg, medianavg, fednova, fedavgm, fedadagrad, fedyogi, fedadam
std::unique_ptr<Aggregator> make_aggregator(std::string_view id, const AggregatorHyper& hyper = {});
const std::vector<std::string>& aggregator_ids();

// linear rules can run on encrypted updates
bool is_linear_aggregator(std::string_view id);

} // namespace fedad
