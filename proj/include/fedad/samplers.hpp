#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedad/rng.hpp"

namespace fedad {

struct ClientProfile {
    std::string client_id;
    long n_samples = 0;
    double feature_std = 0.0;
    std::optional<double> last_score;
    std::optional<int> last_scored_round;
};

// All samplers return max(1, round(fraction * K)) distinct client ids.
std::size_t selection_size(std::size_t n_clients, double fraction);

std::vector<std::string> random_sample(std::span<const ClientProfile> clients, double fraction,
                                       Rng& rng);

// weights proportional to 1 / (feature_std + 1e-8)
std::vector<std::string> std_sample(std::span<const ClientProfile> clients, double fraction,
                                    Rng& rng);

// weights proportional to n_k
std::vector<std::string> quantity_sample(std::span<const ClientProfile> clients, double fraction,
                                         Rng& rng);

// raw contribution score: alpha * loss_term + beta * divergence_term
double client_score(double loss_term, double divergence_term, double alpha, double beta);

// pool-level scoring: both terms are min-max normalized across the candidates
// before the alpha/beta combination (a constant term contributes 0)
std::vector<double> combined_scores(std::span<const double> loss_sums,
                                    std::span<const double> divergences, double alpha, double beta);

// picks the m clients with the lowest last_score, ties broken by client id;
// round 1 selects everyone so every client gets an initial score
std::vector<std::string> score_sample(std::span<const ClientProfile> clients, double fraction,
                                      int round);

class Sampler {
public:
    virtual ~Sampler() = default;
    virtual std::vector<std::string> select(std::span<const ClientProfile> clients, double fraction,
                                            int round, Rng& rng) = 0;
    virtual std::string_view id() const = 0;
};

// ids: random, std, quantity, score
std::unique_ptr<Sampler> make_sampler(std::string_view id);
const std::vector<std::string>& sampler_ids();

} // namespace fedad
