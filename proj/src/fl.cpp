#include "fedad/fl.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace fedad {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double vector_l2(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double flattened_std(const std::vector<Case>& cases) {
    std::size_t count = 0;
    double mean = 0.0;
    for (const auto& c : cases) {
        for (double f : c.features) {
            mean += f;
            ++count;
        }
    }
    if (count == 0) return 0.0;
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (const auto& c : cases) {
        for (double f : c.features) var += (f - mean) * (f - mean);
    }
    return std::sqrt(var / static_cast<double>(count));
}

MetricsReport nan_report() { return {}; }

} // namespace

Setting setting_from_string(const std::string& s) {
    if (s == "centralized") return Setting::Centralized;
    if (s == "individual") return Setting::Individual;
    if (s == "federated") return Setting::Federated;
    throw ConfigError("unknown setting: " + s);
}

const char* setting_name(Setting s) {
    switch (s) {
    case Setting::Centralized: return "centralized";
    case Setting::Individual: return "individual";
    case Setting::Federated: return "federated";
    }
    return "?";
}

void validate_config(const ExperimentConfig& config) {
    if (config.rounds < 1) throw ConfigError("rounds must be >= 1");
    if (config.local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
    if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(config.fraction > 0.0) || config.fraction > 1.0) {
        throw ConfigError("sampler fraction must be in (0,1]");
    }
    if (config.hidden_dim < 1 || config.latent_dim < 1) {
        throw ConfigError("model dimensions must be >= 1");
    }
    if (config.dropout < 0.0 || config.dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (config.alpha < 0.0 || config.beta < 0.0 || config.alpha + config.beta <= 0.0) {
        throw ConfigError("score sampler weights require alpha, beta >= 0 and alpha + beta > 0");
    }
    if (config.presumed_normal_quantile < 0.0 || config.presumed_normal_quantile > 1.0) {
        throw ConfigError("presumed-normal quantile must be in [0,1]");
    }
    if (config.seeds.empty()) throw ConfigError("at least one seed is required");
    if (std::find(aggregator_ids().begin(), aggregator_ids().end(), config.aggregator_id) ==
        aggregator_ids().end()) {
        throw ConfigError("unknown aggregator id: " + config.aggregator_id);
    }
    if (std::find(sampler_ids().begin(), sampler_ids().end(), config.sampler_id) ==
        sampler_ids().end()) {
        throw ConfigError("unknown sampler id: " + config.sampler_id);
    }
    if (config.fhe && !is_linear_aggregator(config.aggregator_id)) {
        throw ConfigError("fhe requires a linear aggregator (fedavg or simpleavg), got " +
                          config.aggregator_id);
    }
    if (config.dataset_kind != "synthetic" && config.dataset_kind != "flamenco" &&
        config.dataset_kind != "asdtest" && config.dataset_kind != "csv") {
        throw ConfigError("unknown dataset kind: " + config.dataset_kind);
    }
    if (config.dataset_kind != "synthetic" && config.dataset_path.empty()) {
        throw ConfigError("dataset.path is required for kind " + config.dataset_kind);
    }
    if (config.fhe) he::validate_params(config.he_params);
}

FederatedDataset load_experiment_dataset(const ExperimentConfig& config, std::uint64_t seed) {
    if (config.dataset_kind == "synthetic") {
        Rng rng(derive_seed(seed, hash_bytes("datagen")));
        return generate_synthetic(config.synthetic, rng);
    }
    if (config.dataset_kind == "flamenco" || config.dataset_kind == "csv") {
        return load_flamenco(config.dataset_path, config.presumed_normal_quantile);
    }
    if (config.dataset_kind == "asdtest") {
        Rng rng(derive_seed(seed, hash_bytes("partition")));
        return load_asdtest(config.dataset_path, config.partition_clients, rng,
                            config.presumed_normal_quantile);
    }
    throw ConfigError("unknown dataset kind: " + config.dataset_kind);
}

Model make_model(const ExperimentConfig& config, int input_dim) {
    if (config.model == ModelKind::AutoEncoder) {
        AutoEncoderSpec spec;
        spec.input_dim = input_dim;
        spec.hidden_dim = config.hidden_dim;
        spec.dropout = config.dropout;
        spec.mirror_dropout = config.mirror_dropout;
        return Model::autoencoder(spec);
    }
    VaeSpec spec;
    spec.input_dim = input_dim;
    spec.hidden_dim = config.hidden_dim;
    spec.latent_dim = config.latent_dim;
    spec.dropout = config.dropout;
    spec.mirror_dropout = config.mirror_dropout;
    spec.kl_weight = config.kl_weight;
    return Model::vae(spec);
}

RoundUpdate local_training(const std::vector<Case>& train, const Model& model,
                           std::vector<double> params, int epochs, int batch_size, double lr,
                           Rng& rng) {
    if (train.empty()) throw DataError("local_training: empty train set");
    if (epochs < 1) throw ConfigError("local_training: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("local_training: batch size must be >= 1");

    const std::size_t n = train.size();
    const auto b = static_cast<std::size_t>(batch_size);
    nn::AdamState state(params.size());
    std::vector<double> grad(params.size());
    std::vector<std::size_t> index(n);
    for (std::size_t i = 0; i < n; ++i) index[i] = i;

    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(index);
        for (std::size_t start = 0; start < n; start += b) {
            const std::size_t size = std::min(b, n - start);
            Matrix batch(size, train[0].features.size());
            for (std::size_t r = 0; r < size; ++r) {
                const auto& f = train[index[start + r]].features;
                std::copy(f.begin(), f.end(), batch.row(r));
            }
            model.loss_and_grad(params, batch, rng, grad);
            nn::adam_step(params, grad, state, lr);
        }
    }

    RoundUpdate update;
    update.client_id = train[0].client_id;
    update.num_samples = static_cast<long>(n);
    update.local_steps =
        static_cast<long>(epochs) * static_cast<long>((n + b - 1) / b);
    double loss_sum = 0.0;
    for (const auto& c : train) loss_sum += model.score(params, c.features);
    update.train_loss_sum = loss_sum;
    update.params = std::move(params);
    return update;
}

MetricsReport evaluate(const Model& model, std::span<const double> params,
                       const std::vector<Case>& eval_cases, const SireosParams& sireos_params) {
    if (eval_cases.empty()) throw DataError("evaluate: empty evaluation set");

    const std::size_t n = eval_cases.size();
    std::vector<double> scores(n);
    Matrix features(n, eval_cases[0].features.size());
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = model.score(params, eval_cases[i].features);
        std::copy(eval_cases[i].features.begin(), eval_cases[i].features.end(), features.row(i));
    }

    MetricsReport report;

    std::vector<double> labeled_scores;
    std::vector<int> labels;
    double sum_total = 0.0;
    double sum_by_label[3] = {0.0, 0.0, 0.0}; // unknown, negative, positive
    std::size_t count_by_label[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        sum_total += scores[i];
        const int t = static_cast<int>(eval_cases[i].target);
        sum_by_label[t + 1] += scores[i];
        count_by_label[t + 1] += 1;
        if (t == 0 || t == 1) {
            labeled_scores.push_back(scores[i]);
            labels.push_back(t);
        }
    }

    report.mean_loss_total = sum_total / static_cast<double>(n);
    report.mean_loss_unknown =
        count_by_label[0] ? sum_by_label[0] / static_cast<double>(count_by_label[0]) : kNan;
    report.mean_loss_negative =
        count_by_label[1] ? sum_by_label[1] / static_cast<double>(count_by_label[1]) : kNan;
    report.mean_loss_positive =
        count_by_label[2] ? sum_by_label[2] / static_cast<double>(count_by_label[2]) : kNan;

    if (!labels.empty()) {
        report.auc = auc_roc(labeled_scores, labels);
        report.ap = average_precision(labeled_scores, labels);
    }

    double score_sum = 0.0;
    for (double s : scores) score_sum += s;
    if (n >= 2 && score_sum > 0.0) {
        report.sireos = sireos(scores, features, sireos_params);
    }
    return report;
}

namespace {

// The round loop shared by all three settings.
TrainingHistory run_loop(const ExperimentConfig& config, const FederatedDataset& dataset,
                         std::uint64_t seed) {
    validate_config(config);

    std::vector<std::string> pool;
    for (const auto& [id, data] : dataset.clients) {
        if (data.train.empty()) {
            std::cerr << "[fedad] warning: client " << id << " has no train cases, skipping\n";
        } else {
            pool.push_back(id);
        }
    }
    if (pool.empty()) throw DataError("run: no client has train data");

    const Model model = make_model(config, dataset.feature_count);
    auto sampler = make_sampler(config.sampler_id);
    auto aggregator = make_aggregator(config.aggregator_id, config.agg);
    aggregator->reset(model.param_count());

    std::vector<ClientProfile> profiles;
    for (const auto& id : pool) {
        const auto& data = dataset.clients.at(id);
        ClientProfile p;
        p.client_id = id;
        p.n_samples = static_cast<long>(data.train.size());
        p.feature_std = flattened_std(data.train);
        profiles.push_back(std::move(p));
    }

    Rng init_rng(derive_seed(seed, hash_bytes("init")));
    std::vector<double> global = model.init_params(init_rng);

    std::optional<he::HEKeys> keys;
    if (config.fhe) {
        Rng key_rng(derive_seed(seed, hash_bytes("keygen")));
        keys = he::keygen(config.he_params, key_rng);
    }

    const std::vector<Case> eval_cases = dataset.all_eval();

    TrainingHistory history;
    history.rounds.reserve(static_cast<std::size_t>(config.rounds));

    for (int round = 1; round <= config.rounds; ++round) {
        Rng sample_rng(derive_seed(seed, hash_bytes("sample"), static_cast<std::uint64_t>(round)));
        std::vector<std::string> selected =
            sampler->select(profiles, config.fraction, round, sample_rng);
        std::sort(selected.begin(), selected.end());

        std::vector<RoundUpdate> updates;
        updates.reserve(selected.size());
        for (const auto& id : selected) {
            Rng client_rng(derive_seed(seed, hash_bytes("local"), static_cast<std::uint64_t>(round),
                                       hash_bytes(id)));
            updates.push_back(local_training(dataset.clients.at(id).train, model, global,
                                             config.local_epochs, config.batch_size, config.lr,
                                             client_rng));
        }

        // contribution scores against the broadcast global model
        std::vector<double> loss_terms(updates.size());
        std::vector<double> divergence_terms(updates.size());
        for (std::size_t k = 0; k < updates.size(); ++k) {
            loss_terms[k] = updates[k].train_loss_sum;
            divergence_terms[k] = vector_l2(updates[k].params, global);
        }
        const std::vector<double> scores =
            combined_scores(loss_terms, divergence_terms, config.alpha, config.beta);
        for (std::size_t k = 0; k < updates.size(); ++k) {
            for (auto& p : profiles) {
                if (p.client_id == updates[k].client_id) {
                    p.last_score = scores[k];
                    p.last_scored_round = round;
                    break;
                }
            }
        }

        double sample_total = 0.0;
        double loss_total = 0.0;
        for (const auto& u : updates) {
            sample_total += static_cast<double>(u.num_samples);
            loss_total += u.train_loss_sum;
        }

        if (config.fhe) {
            // clients encrypt, the server blindly averages, clients decrypt
            std::vector<std::pair<he::CipherVector, long>> ciphers;
            ciphers.reserve(updates.size());
            for (const auto& u : updates) {
                Rng enc_rng(derive_seed(seed, hash_bytes("encrypt"),
                                        static_cast<std::uint64_t>(round), hash_bytes(u.client_id)));
                const long weight = config.aggregator_id == "fedavg" ? u.num_samples : 1L;
                ciphers.emplace_back(he::encrypt(u.params, *keys, enc_rng), weight);
            }
            const he::CipherVector blended = he::secure_fedavg(ciphers);
            global = he::decrypt(blended, *keys);
        } else {
            global = aggregator->aggregate(global, updates);
        }

        RoundRecord record;
        record.round = round;
        record.train_loss = loss_total / sample_total;
        record.participants = selected;
        record.metrics = eval_cases.empty() ? nan_report()
                                            : evaluate(model, global, eval_cases, config.sireos);
        history.rounds.push_back(std::move(record));
    }

    history.final_params = std::move(global);
    history.final_metrics = history.rounds.back().metrics;
    return history;
}

// Centralized and individual baselines run the identical loop with the
// trivial aggregation plumbing.
ExperimentConfig plain_training_config(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.aggregator_id = "fedavg";
    c.sampler_id = "random";
    c.fraction = 1.0;
    return c;
}

FederatedDataset pool_clients(const FederatedDataset& dataset) {
    FederatedDataset pooled;
    pooled.feature_count = dataset.feature_count;
    pooled.name = dataset.name;
    const std::string id =
        dataset.clients.size() == 1 ? dataset.clients.begin()->first : std::string("pooled");
    ClientData data;
    for (const auto& [cid, cdata] : dataset.clients) {
        data.train.insert(data.train.end(), cdata.train.begin(), cdata.train.end());
        data.eval.insert(data.eval.end(), cdata.eval.begin(), cdata.eval.end());
    }
    pooled.clients.emplace(id, std::move(data));
    return pooled;
}

} // namespace

TrainingHistory run_federated(const ExperimentConfig& config, const FederatedDataset& dataset,
                              std::uint64_t seed) {
    return run_loop(config, dataset, seed);
}

TrainingHistory run_centralized(const ExperimentConfig& config, const FederatedDataset& dataset,
                                std::uint64_t seed) {
    return run_loop(plain_training_config(config), pool_clients(dataset), seed);
}

IndividualResult run_individual(const ExperimentConfig& config, const FederatedDataset& dataset,
                                std::uint64_t seed) {
    const ExperimentConfig plain = plain_training_config(config);
    IndividualResult result;

    for (const auto& [id, data] : dataset.clients) {
        if (data.train.empty()) {
            std::cerr << "[fedad] warning: client " << id << " has no train cases, skipping\n";
            continue;
        }
        if (data.eval.empty()) {
            std::cerr << "[fedad] warning: client " << id << " has no eval cases; metrics omitted\n";
        }
        FederatedDataset single;
        single.feature_count = dataset.feature_count;
        single.name = dataset.name;
        single.clients.emplace(id, data);
        result.per_client.emplace(id, run_loop(plain, single, seed));
    }
    if (result.per_client.empty()) throw DataError("individual: no client has train data");

    // macro averages per round over clients with defined values
    const auto rounds = result.per_client.begin()->second.rounds.size();
    TrainingHistory macro;
    macro.rounds.resize(rounds);
    for (std::size_t r = 0; r < rounds; ++r) {
        RoundRecord& rec = macro.rounds[r];
        rec.round = static_cast<int>(r) + 1;
        double train_acc = 0.0;
        std::size_t train_n = 0;
        auto fold = [](double& acc, std::size_t& count, double v) {
            if (!std::isnan(v)) {
                acc += v;
                ++count;
            }
        };
        double auc_acc = 0, ap_acc = 0, sir_acc = 0, tot_acc = 0, unk_acc = 0, neg_acc = 0, pos_acc = 0;
        std::size_t auc_n = 0, ap_n = 0, sir_n = 0, tot_n = 0, unk_n = 0, neg_n = 0, pos_n = 0;
        for (const auto& [id, hist] : result.per_client) {
            const RoundRecord& cr = hist.rounds[r];
            fold(train_acc, train_n, cr.train_loss);
            if (cr.metrics.auc) fold(auc_acc, auc_n, *cr.metrics.auc);
            if (cr.metrics.ap) fold(ap_acc, ap_n, *cr.metrics.ap);
            fold(sir_acc, sir_n, cr.metrics.sireos);
            fold(tot_acc, tot_n, cr.metrics.mean_loss_total);
            fold(unk_acc, unk_n, cr.metrics.mean_loss_unknown);
            fold(neg_acc, neg_n, cr.metrics.mean_loss_negative);
            fold(pos_acc, pos_n, cr.metrics.mean_loss_positive);
        }
        rec.train_loss = train_n ? train_acc / static_cast<double>(train_n) : kNan;
        if (auc_n) rec.metrics.auc = auc_acc / static_cast<double>(auc_n);
        if (ap_n) rec.metrics.ap = ap_acc / static_cast<double>(ap_n);
        rec.metrics.sireos = sir_n ? sir_acc / static_cast<double>(sir_n) : kNan;
        rec.metrics.mean_loss_total = tot_n ? tot_acc / static_cast<double>(tot_n) : kNan;
        rec.metrics.mean_loss_unknown = unk_n ? unk_acc / static_cast<double>(unk_n) : kNan;
        rec.metrics.mean_loss_negative = neg_n ? neg_acc / static_cast<double>(neg_n) : kNan;
        rec.metrics.mean_loss_positive = pos_n ? pos_acc / static_cast<double>(pos_n) : kNan;
    }
    macro.final_metrics = macro.rounds.back().metrics;
    result.macro = std::move(macro);
    return result;
}

} // namespace fedad
