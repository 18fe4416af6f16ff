#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedad/fl.hpp"

namespace fedad {

// Flat key-value config text: "section.key = value" lines, '#' comments.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

// Canonical key/value form; the fingerprint is FNV-1a over the sorted lines.
std::map<std::string, std::string> config_to_kv(const ExperimentConfig& config);
std::string config_fingerprint(const ExperimentConfig& config);

struct SeedResult {
    std::uint64_t seed = 0;
    MetricsReport final_metrics;
    double final_train_loss = 0.0;
    TrainingHistory history;                          // macro history for individual runs
    std::map<std::string, MetricsReport> per_client;  // individual runs only
};

struct MetricsStats {
    MetricsReport mean;
    MetricsReport stddev;
};

struct RunSummary {
    ExperimentConfig config;
    std::string fingerprint;
    std::vector<SeedResult> per_seed;
    MetricsStats across_seeds;
    double wall_seconds = 0.0; // reported separately, never in the CSVs
    std::vector<std::string> round_csv_paths;
    std::string summary_csv_path;
};

// Executes the configured setting once per seed and writes, under
// out_dir/<name>/: rounds_seed<S>.csv per seed plus summary.csv. All CSV
// content is deterministic for a given config (6-decimal fixed format).
RunSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir);

// In-memory variant used by tests and bindings; writes nothing.
RunSummary run_experiment_in_memory(const ExperimentConfig& config);

// Recomputes the fingerprint from the config echo embedded in a summary file
// and throws DataError when it does not match the recorded one.
void verify_summary_file(const std::string& path);

enum class Sweep { Aggregators, Samplers, Settings, Fhe };
Sweep sweep_from_string(const std::string& s);

// One run per grid cell; emits compare_<sweep>.csv in long format
// (variant, fraction, seed, round, metrics per row).
std::vector<RunSummary> run_compare(Sweep sweep, const ExperimentConfig& base,
                                    const std::string& out_dir);

// The sampler sweep's default fraction grid.
const std::vector<double>& default_fraction_grid();

} // namespace fedad
