#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedad/aggregators.hpp"
#include "fedad/dataset.hpp"
#include "fedad/metrics.hpp"
#include "fedad/models.hpp"
#include "fedad/samplers.hpp"
#include "fedad/secure_agg.hpp"

namespace fedad {

enum class Setting { Centralized, Individual, Federated };

Setting setting_from_string(const std::string& s);
const char* setting_name(Setting s);

struct MetricsReport {
    std::optional<double> auc;
    std::optional<double> ap;
    double sireos = std::numeric_limits<double>::quiet_NaN();
    double mean_loss_total = std::numeric_limits<double>::quiet_NaN();
    double mean_loss_unknown = std::numeric_limits<double>::quiet_NaN();
    double mean_loss_negative = std::numeric_limits<double>::quiet_NaN();
    double mean_loss_positive = std::numeric_limits<double>::quiet_NaN();
};

struct RoundRecord {
    int round = 0;
    double train_loss = std::numeric_limits<double>::quiet_NaN(); // mean per-sample loss
    MetricsReport metrics;
    std::vector<std::string> participants;
};

struct TrainingHistory {
    std::vector<RoundRecord> rounds;
    std::vector<double> final_params;
    MetricsReport final_metrics;
};

struct ExperimentConfig {
    std::string name = "experiment";

    // dataset
    std::string dataset_kind = "synthetic"; // synthetic | flamenco | asdtest | csv
    std::string dataset_path;
    SyntheticSpec synthetic;
    double presumed_normal_quantile = 0.5;
    int partition_clients = 5; // for datasets without a client column

    // model
    ModelKind model = ModelKind::AutoEncoder;
    int hidden_dim = 64;
    int latent_dim = 64;
    double dropout = 0.2;
    bool mirror_dropout = true;
    double kl_weight = 1.0;

    // run
    Setting setting = Setting::Federated;
    int rounds = 0; // 0 = dataset-dependent default, resolved at parse time
    int local_epochs = 3;
    int batch_size = 32;
    double lr = 0.001;

    // aggregation
    std::string aggregator_id = "fedavg";
    AggregatorHyper agg;

    // sampling
    std::string sampler_id = "random";
    double fraction = 1.0;
    double alpha = 0.5;
    double beta = 0.5;

    // privacy
    bool fhe = false;
    he::SchemeParams he_params;

    // evaluation
    SireosParams sireos;

    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
};

void validate_config(const ExperimentConfig& config);

// Builds the dataset the config names; synthetic and partitioned datasets
// derive their generation stream from `seed`.
FederatedDataset load_experiment_dataset(const ExperimentConfig& config, std::uint64_t seed);

Model make_model(const ExperimentConfig& config, int input_dim);

// E epochs of shuffled mini-batch Adam over batches of size B (final partial
// batch included). train_loss_sum is the sum of per-sample reconstruction
// losses over the train set, measured after local training.
RoundUpdate local_training(const std::vector<Case>& train, const Model& model,
                           std::vector<double> params, int epochs, int batch_size, double lr,
                           Rng& rng);

// Scores every case; AUC/AP over the {0,1}-labeled subset, SIREOS over all
// cases, mean losses per label.
MetricsReport evaluate(const Model& model, std::span<const double> params,
                       const std::vector<Case>& eval_cases, const SireosParams& sireos_params);

TrainingHistory run_federated(const ExperimentConfig& config, const FederatedDataset& dataset,
                              std::uint64_t seed);

// Pools every client's train cases into one virtual client (keeping the id
// when there is exactly one) and runs the same round loop, so a single-client
// federated run and a centralized run coincide exactly.
TrainingHistory run_centralized(const ExperimentConfig& config, const FederatedDataset& dataset,
                                std::uint64_t seed);

struct IndividualResult {
    std::map<std::string, TrainingHistory> per_client;
    TrainingHistory macro; // per-round macro averages across clients
};

IndividualResult run_individual(const ExperimentConfig& config, const FederatedDataset& dataset,
                                std::uint64_t seed);

} // namespace fedad
