#include "fedad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fedad {

namespace {

void check_labels(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores/labels length mismatch");
    for (double s : scores) {
        if (!std::isfinite(s)) throw NumericError("scores contain non-finite values");
    }
    for (int l : labels) {
        if (l != 0 && l != 1) throw DataError("labels must be 0 or 1, got " + std::to_string(l));
    }
}

} // namespace

std::optional<double> auc_roc(std::span<const double> scores, std::span<const int> labels) {
    check_labels(scores, labels);
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups, 1-based
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == 1) rank_sum_pos += rank[k];
    }
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const int> labels) {
    check_labels(scores, labels);
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    if (n_pos == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[order[r]] == 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

double sireos(std::span<const double> scores, const Matrix& features, const SireosParams& params) {
    const std::size_t n = features.rows;
    if (scores.size() != n) throw ShapeError("sireos: scores/features length mismatch");
    if (n < 2) throw DataError("sireos: need at least two points");
    const int k = std::min(params.k, static_cast<int>(n) - 1);
    if (k < 1) throw DataError("sireos: neighborhood size must be >= 1");

    double score_sum = 0.0;
    for (double s : scores) {
        if (!std::isfinite(s) || s < 0.0) throw NumericError("sireos: scores must be finite and >= 0");
        score_sum += s;
    }
    if (score_sum <= 0.0) throw DataError("sireos: scores must not be all zero");

    // squared pairwise distances
    Matrix d2(n, n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            double acc = 0.0;
            const double* xa = features.row(a);
            const double* xb = features.row(b);
            for (std::size_t f = 0; f < features.cols; ++f) {
                const double diff = xa[f] - xb[f];
                acc += diff * diff;
            }
            d2(a, b) = acc;
            d2(b, a) = acc;
        }
    }

    // bandwidth: percentile of nonzero pairwise distances; all-identical
    // features degenerate to similarity 1 everywhere
    std::vector<double> nonzero;
    nonzero.reserve(n * (n - 1) / 2);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            if (d2(a, b) > 0.0) nonzero.push_back(std::sqrt(d2(a, b)));
        }
    }
    double t = 0.0;
    if (!nonzero.empty()) {
        std::sort(nonzero.begin(), nonzero.end());
        const double pos = params.bandwidth_percentile / 100.0 * static_cast<double>(nonzero.size() - 1);
        const auto idx = static_cast<std::size_t>(std::floor(pos));
        t = nonzero[std::min(idx, nonzero.size() - 1)];
    }

    double index = 0.0;
    std::vector<double> row(n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) row[b] = d2(a, b);
        row[a] = std::numeric_limits<double>::infinity(); // exclude self
        std::partial_sort(row.begin(), row.begin() + k, row.end());
        // mean similarity over the k nearest neighbors
        double sim = 0.0;
        for (int j = 0; j < k; ++j) {
            sim += t > 0.0 ? std::exp(-row[j] / (2.0 * t * t)) : 1.0;
        }
        sim /= static_cast<double>(k);
        index += (scores[a] / score_sum) * sim;
    }
    return index;
}

} // namespace fedad
