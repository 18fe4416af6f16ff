#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedad/matrix.hpp"

namespace fedad {

// Higher score = more anomalous throughout.

// Mann-Whitney statistic via midranks: P(score_pos > score_neg) + 0.5 P(tie).
// Returns nullopt when fewer than two distinct labels are present.
std::optional<double> auc_roc(std::span<const double> scores, std::span<const int> labels);

// Mean of precision at each positive's rank, scores sorted descending, ties
// kept in original order. Returns nullopt when there is no positive.
std::optional<double> average_precision(std::span<const double> scores, std::span<const int> labels);

struct SireosParams {
    int k = 10;                        // neighborhood size (capped at n-1)
    double bandwidth_percentile = 1.0; // percentile of nonzero pairwise distances
};

// Label-free outlier-solution quality: sum_i p_i * sim_i with
// p_i = score_i / sum_j score_j and sim_i the mean Gaussian similarity
// exp(-d^2 / (2 t^2)) over the k nearest neighbors. Lower is better.
double sireos(std::span<const double> scores, const Matrix& features,
              const SireosParams& params = {});

} // namespace fedad
