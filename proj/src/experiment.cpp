#include "fedad/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fedad {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

std::string fmt6(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt6(const std::optional<double>& v) { return v ? fmt6(*v) : "nan"; }

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, value).second) {
            throw ConfigError("duplicate config key: " + key);
        }
    }

    ExperimentConfig cfg;
    cfg.rounds = 0; // resolved after the dataset kind is known
    bool seeds_listed = false;
    bool num_seeds_set = false;

    for (const auto& [key, value] : kv) {
        if (key == "name") {
            cfg.name = value;
        } else if (key == "dataset.kind") {
            cfg.dataset_kind = value;
        } else if (key == "dataset.path") {
            cfg.dataset_path = value;
        } else if (key == "dataset.quantile") {
            cfg.presumed_normal_quantile = to_double(key, value);
        } else if (key == "dataset.clients") {
            cfg.partition_clients = to_int(key, value);
        } else if (key == "synthetic.normal") {
            cfg.synthetic.n_normal = to_int(key, value);
        } else if (key == "synthetic.anomaly") {
            cfg.synthetic.n_anomaly = to_int(key, value);
        } else if (key == "synthetic.unknown") {
            cfg.synthetic.n_unknown = to_int(key, value);
        } else if (key == "synthetic.features") {
            cfg.synthetic.feature_count = to_int(key, value);
        } else if (key == "synthetic.separation") {
            cfg.synthetic.separation = to_double(key, value);
        } else if (key == "synthetic.clients") {
            cfg.synthetic.k_clients = to_int(key, value);
        } else if (key == "synthetic.noise_sigma") {
            cfg.synthetic.noise_sigma = to_double(key, value);
        } else if (key == "synthetic.label_skew") {
            cfg.synthetic.label_skew = to_double(key, value);
        } else if (key == "synthetic.quantity_skew") {
            cfg.synthetic.quantity_skew = to_double(key, value);
        } else if (key == "synthetic.train_fraction") {
            cfg.synthetic.train_fraction = to_double(key, value);
        } else if (key == "synthetic.unknown_train_fraction") {
            cfg.synthetic.unknown_train_fraction = to_double(key, value);
        } else if (key == "synthetic.unknown_anomaly_fraction") {
            cfg.synthetic.unknown_anomaly_fraction = to_double(key, value);
        } else if (key == "model.kind") {
            if (value == "ae") {
                cfg.model = ModelKind::AutoEncoder;
            } else if (value == "vae") {
                cfg.model = ModelKind::Vae;
            } else {
                throw ConfigError("model.kind must be ae or vae, got '" + value + "'");
            }
        } else if (key == "model.hidden") {
            cfg.hidden_dim = to_int(key, value);
        } else if (key == "model.latent") {
            cfg.latent_dim = to_int(key, value);
        } else if (key == "model.dropout") {
            cfg.dropout = to_double(key, value);
        } else if (key == "model.mirror_dropout") {
            cfg.mirror_dropout = to_bool(key, value);
        } else if (key == "model.kl_weight") {
            cfg.kl_weight = to_double(key, value);
        } else if (key == "run.setting") {
            cfg.setting = setting_from_string(value);
        } else if (key == "run.rounds") {
            cfg.rounds = to_int(key, value);
        } else if (key == "run.local_epochs") {
            cfg.local_epochs = to_int(key, value);
        } else if (key == "run.batch") {
            cfg.batch_size = to_int(key, value);
        } else if (key == "run.lr") {
            cfg.lr = to_double(key, value);
        } else if (key == "run.seeds") {
            cfg.seeds.clear();
            std::istringstream list(value);
            std::string item;
            while (std::getline(list, item, ',')) {
                item = trim(item);
                if (!item.empty()) {
                    cfg.seeds.push_back(static_cast<std::uint64_t>(to_int(key, item)));
                }
            }
            if (cfg.seeds.empty()) throw ConfigError("run.seeds: empty seed list");
            seeds_listed = true;
        } else if (key == "run.num_seeds") {
            const int n = to_int(key, value);
            if (n < 1) throw ConfigError("run.num_seeds must be >= 1");
            cfg.seeds.clear();
            for (int s = 1; s <= n; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
            num_seeds_set = true;
        } else if (key == "aggregator.id") {
            cfg.aggregator_id = value;
        } else if (key == "aggregator.beta") {
            cfg.agg.beta = to_double(key, value);
        } else if (key == "aggregator.server_lr") {
            cfg.agg.server_lr = to_double(key, value);
        } else if (key == "aggregator.beta1") {
            cfg.agg.beta1 = to_double(key, value);
        } else if (key == "aggregator.beta2") {
            cfg.agg.beta2 = to_double(key, value);
        } else if (key == "aggregator.tau") {
            cfg.agg.tau = to_double(key, value);
        } else if (key == "sampler.id") {
            cfg.sampler_id = value;
        } else if (key == "sampler.fraction") {
            cfg.fraction = to_double(key, value);
        } else if (key == "sampler.alpha") {
            cfg.alpha = to_double(key, value);
        } else if (key == "sampler.beta") {
            cfg.beta = to_double(key, value);
        } else if (key == "fhe.enabled") {
            cfg.fhe = to_bool(key, value);
        } else if (key == "fhe.secret_dim") {
            cfg.he_params.secret_dim = to_int(key, value);
        } else if (key == "fhe.noise_bound") {
            cfg.he_params.noise_bound = to_int(key, value);
        } else if (key == "eval.sireos_k") {
            cfg.sireos.k = to_int(key, value);
        } else if (key == "eval.sireos_percentile") {
            cfg.sireos.bandwidth_percentile = to_double(key, value);
        } else {
            throw ConfigError("unknown config key: " + key);
        }
    }
    if (seeds_listed && num_seeds_set) {
        throw ConfigError("run.seeds and run.num_seeds are mutually exclusive");
    }

    if (cfg.rounds == 0) {
        // paper protocol defaults per dataset; synthetic stays desk-scale
        if (cfg.dataset_kind == "flamenco") {
            cfg.rounds = 100;
        } else if (cfg.dataset_kind == "asdtest") {
            cfg.rounds = 200;
        } else {
            cfg.rounds = 30;
        }
    }
    validate_config(cfg);
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str());
}

std::map<std::string, std::string> config_to_kv(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv;
    kv["name"] = c.name;
    kv["dataset.kind"] = c.dataset_kind;
    kv["dataset.path"] = c.dataset_path;
    kv["dataset.quantile"] = fmt_full(c.presumed_normal_quantile);
    kv["dataset.clients"] = std::to_string(c.partition_clients);
    kv["synthetic.normal"] = std::to_string(c.synthetic.n_normal);
    kv["synthetic.anomaly"] = std::to_string(c.synthetic.n_anomaly);
    kv["synthetic.unknown"] = std::to_string(c.synthetic.n_unknown);
    kv["synthetic.features"] = std::to_string(c.synthetic.feature_count);
    kv["synthetic.separation"] = fmt_full(c.synthetic.separation);
    kv["synthetic.clients"] = std::to_string(c.synthetic.k_clients);
    kv["synthetic.noise_sigma"] = fmt_full(c.synthetic.noise_sigma);
    kv["synthetic.label_skew"] = fmt_full(c.synthetic.label_skew);
    kv["synthetic.quantity_skew"] = fmt_full(c.synthetic.quantity_skew);
    kv["synthetic.train_fraction"] = fmt_full(c.synthetic.train_fraction);
    kv["synthetic.unknown_train_fraction"] = fmt_full(c.synthetic.unknown_train_fraction);
    kv["synthetic.unknown_anomaly_fraction"] = fmt_full(c.synthetic.unknown_anomaly_fraction);
    kv["model.kind"] = c.model == ModelKind::AutoEncoder ? "ae" : "vae";
    kv["model.hidden"] = std::to_string(c.hidden_dim);
    kv["model.latent"] = std::to_string(c.latent_dim);
    kv["model.dropout"] = fmt_full(c.dropout);
    kv["model.mirror_dropout"] = c.mirror_dropout ? "true" : "false";
    kv["model.kl_weight"] = fmt_full(c.kl_weight);
    kv["run.setting"] = setting_name(c.setting);
    kv["run.rounds"] = std::to_string(c.rounds);
    kv["run.local_epochs"] = std::to_string(c.local_epochs);
    kv["run.batch"] = std::to_string(c.batch_size);
    kv["run.lr"] = fmt_full(c.lr);
    std::string seeds;
    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
        if (i) seeds += ',';
        seeds += std::to_string(c.seeds[i]);
    }
    kv["run.seeds"] = seeds;
    kv["aggregator.id"] = c.aggregator_id;
    kv["aggregator.beta"] = fmt_full(c.agg.beta);
    kv["aggregator.server_lr"] = fmt_full(c.agg.server_lr);
    kv["aggregator.beta1"] = fmt_full(c.agg.beta1);
    kv["aggregator.beta2"] = fmt_full(c.agg.beta2);
    kv["aggregator.tau"] = fmt_full(c.agg.tau);
    kv["sampler.id"] = c.sampler_id;
    kv["sampler.fraction"] = fmt_full(c.fraction);
    kv["sampler.alpha"] = fmt_full(c.alpha);
    kv["sampler.beta"] = fmt_full(c.beta);
    kv["fhe.enabled"] = c.fhe ? "true" : "false";
    kv["fhe.secret_dim"] = std::to_string(c.he_params.secret_dim);
    kv["fhe.noise_bound"] = std::to_string(c.he_params.noise_bound);
    kv["eval.sireos_k"] = std::to_string(c.sireos.k);
    kv["eval.sireos_percentile"] = fmt_full(c.sireos.bandwidth_percentile);
    return kv;
}

std::string config_fingerprint(const ExperimentConfig& config) {
    const auto kv = config_to_kv(config);
    std::string text;
    for (const auto& [k, v] : kv) {
        text += k;
        text += '=';
        text += v;
        text += '\n';
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_bytes(text)));
    return buf;
}

namespace {

SeedResult execute_seed(const ExperimentConfig& config, std::uint64_t seed) {
    SeedResult result;
    result.seed = seed;
    const FederatedDataset dataset = load_experiment_dataset(config, seed);
    if (config.setting == Setting::Federated) {
        result.history = run_federated(config, dataset, seed);
    } else if (config.setting == Setting::Centralized) {
        result.history = run_centralized(config, dataset, seed);
    } else {
        IndividualResult ind = run_individual(config, dataset, seed);
        result.history = std::move(ind.macro);
        for (const auto& [id, hist] : ind.per_client) {
            result.per_client.emplace(id, hist.final_metrics);
        }
    }
    result.final_metrics = result.history.final_metrics;
    result.final_train_loss = result.history.rounds.back().train_loss;
    return result;
}

struct Accumulator {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    void add(double v) {
        if (!std::isnan(v)) {
            sum += v;
            sum_sq += v * v;
            ++n;
        }
    }
    double mean() const { return n ? sum / static_cast<double>(n) : kNan; }
    double stddev() const {
        if (!n) return kNan;
        const double m = mean();
        const double var = sum_sq / static_cast<double>(n) - m * m;
        return std::sqrt(std::max(0.0, var));
    }
};

MetricsStats stats_across_seeds(const std::vector<SeedResult>& seeds) {
    Accumulator auc, ap, sir, total, unk, neg, pos;
    for (const auto& s : seeds) {
        if (s.final_metrics.auc) auc.add(*s.final_metrics.auc);
        if (s.final_metrics.ap) ap.add(*s.final_metrics.ap);
        sir.add(s.final_metrics.sireos);
        total.add(s.final_metrics.mean_loss_total);
        unk.add(s.final_metrics.mean_loss_unknown);
        neg.add(s.final_metrics.mean_loss_negative);
        pos.add(s.final_metrics.mean_loss_positive);
    }
    MetricsStats stats;
    if (auc.n) stats.mean.auc = auc.mean();
    if (ap.n) stats.mean.ap = ap.mean();
    stats.mean.sireos = sir.mean();
    stats.mean.mean_loss_total = total.mean();
    stats.mean.mean_loss_unknown = unk.mean();
    stats.mean.mean_loss_negative = neg.mean();
    stats.mean.mean_loss_positive = pos.mean();
    if (auc.n) stats.stddev.auc = auc.stddev();
    if (ap.n) stats.stddev.ap = ap.stddev();
    stats.stddev.sireos = sir.stddev();
    stats.stddev.mean_loss_total = total.stddev();
    stats.stddev.mean_loss_unknown = unk.stddev();
    stats.stddev.mean_loss_negative = neg.stddev();
    stats.stddev.mean_loss_positive = pos.stddev();
    return stats;
}

void write_round_rows(std::ofstream& out, const TrainingHistory& history) {
    for (const auto& r : history.rounds) {
        out << r.round << ',' << fmt6(r.train_loss) << ',' << fmt6(r.metrics.mean_loss_total) << ','
            << fmt6(r.metrics.mean_loss_unknown) << ',' << fmt6(r.metrics.mean_loss_negative) << ','
            << fmt6(r.metrics.mean_loss_positive) << ',' << fmt6(r.metrics.auc) << ','
            << fmt6(r.metrics.ap) << ',' << fmt6(r.metrics.sireos) << '\n';
    }
}

const char* kRoundHeader =
    "round,train_loss,test_loss_total,test_loss_label_-1,test_loss_label_0,test_loss_label_1,"
    "auc,ap,sireos";

void write_metrics_row(std::ofstream& out, const MetricsReport& m, double train_loss) {
    out << fmt6(m.auc) << ',' << fmt6(m.ap) << ',' << fmt6(m.sireos) << ','
        << fmt6(m.mean_loss_total) << ',' << fmt6(m.mean_loss_unknown) << ','
        << fmt6(m.mean_loss_negative) << ',' << fmt6(m.mean_loss_positive) << ','
        << fmt6(train_loss) << '\n';
}

} // namespace

RunSummary run_experiment_in_memory(const ExperimentConfig& config) {
    validate_config(config);
    RunSummary summary;
    summary.config = config;
    summary.fingerprint = config_fingerprint(config);
    const auto started = std::chrono::steady_clock::now();
    for (std::uint64_t seed : config.seeds) {
        summary.per_seed.push_back(execute_seed(config, seed));
    }
    summary.across_seeds = stats_across_seeds(summary.per_seed);
    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return summary;
}

RunSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    RunSummary summary = run_experiment_in_memory(config);

    namespace fs = std::filesystem;
    const fs::path dir = fs::path(out_dir) / config.name;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());

    for (const auto& seed_result : summary.per_seed) {
        const fs::path path = dir / ("rounds_seed" + std::to_string(seed_result.seed) + ".csv");
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        out << "# fingerprint=" << summary.fingerprint << '\n';
        out << kRoundHeader << '\n';
        write_round_rows(out, seed_result.history);
        summary.round_csv_paths.push_back(path.string());
    }

    const fs::path summary_path = dir / "summary.csv";
    std::ofstream out(summary_path);
    if (!out) throw IoError("cannot write " + summary_path.string());
    out << "# fedad summary v1\n";
    out << "# fingerprint=" << summary.fingerprint << '\n';
    for (const auto& [k, v] : config_to_kv(config)) {
        out << "# cfg:" << k << '=' << v << '\n';
    }
    out << "row_type,seed,client,auc,ap,sireos,mean_loss_total,mean_loss_unknown,"
           "mean_loss_negative,mean_loss_positive,train_loss\n";
    for (const auto& s : summary.per_seed) {
        out << "seed," << s.seed << ",,";
        write_metrics_row(out, s.final_metrics, s.final_train_loss);
        for (const auto& [client, m] : s.per_client) {
            out << "client," << s.seed << ',' << client << ',';
            write_metrics_row(out, m, kNan);
        }
    }
    out << "mean,,,";
    write_metrics_row(out, summary.across_seeds.mean, kNan);
    out << "std,,,";
    write_metrics_row(out, summary.across_seeds.stddev, kNan);
    if (!out) throw IoError("write failed: " + summary_path.string());
    summary.summary_csv_path = summary_path.string();
    return summary;
}

void verify_summary_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::string recorded;
    std::string text;
    while (std::getline(in, line)) {
        if (line.rfind("# fingerprint=", 0) == 0) {
            recorded = line.substr(14);
        } else if (line.rfind("# cfg:", 0) == 0) {
            text += line.substr(6);
            text += '\n';
        }
    }
    if (recorded.empty()) throw DataError(path + ": no fingerprint record");
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_bytes(text)));
    if (recorded != buf) {
        throw DataError(path + ": fingerprint mismatch (recorded " + recorded + ", recomputed " +
                        buf + ")");
    }
}

Sweep sweep_from_string(const std::string& s) {
    if (s == "aggregators") return Sweep::Aggregators;
    if (s == "samplers") return Sweep::Samplers;
    if (s == "settings") return Sweep::Settings;
    if (s == "fhe") return Sweep::Fhe;
    throw ConfigError("unknown sweep: " + s + " (aggregators|samplers|settings|fhe)");
}

const std::vector<double>& default_fraction_grid() {
    static const std::vector<double> grid = {0.4, 0.6, 0.8};
    return grid;
}

std::vector<RunSummary> run_compare(Sweep sweep, const ExperimentConfig& base,
                                    const std::string& out_dir) {
    struct Cell {
        std::string variant;
        double fraction;
        ExperimentConfig config;
    };
    std::vector<Cell> cells;

    switch (sweep) {
    case Sweep::Aggregators:
        if (base.fhe) throw ConfigError("aggregator sweep requires fhe off");
        for (const auto& id : aggregator_ids()) {
            ExperimentConfig c = base;
            c.aggregator_id = id;
            c.name = base.name + "_" + id;
            cells.push_back({id, base.fraction, std::move(c)});
        }
        break;
    case Sweep::Samplers:
        for (const auto& id : sampler_ids()) {
            for (double f : default_fraction_grid()) {
                ExperimentConfig c = base;
                c.sampler_id = id;
                c.fraction = f;
                char frac[16];
                std::snprintf(frac, sizeof(frac), "%.1f", f);
                c.name = base.name + "_" + id + "_f" + frac;
                cells.push_back({id, f, std::move(c)});
            }
        }
        break;
    case Sweep::Settings:
        for (Setting s : {Setting::Centralized, Setting::Individual, Setting::Federated}) {
            ExperimentConfig c = base;
            c.setting = s;
            c.name = base.name + "_" + setting_name(s);
            cells.push_back({setting_name(s), base.fraction, std::move(c)});
        }
        break;
    case Sweep::Fhe:
        if (!is_linear_aggregator(base.aggregator_id)) {
            throw ConfigError("fhe sweep requires a linear aggregator (fedavg or simpleavg)");
        }
        for (bool enabled : {false, true}) {
            ExperimentConfig c = base;
            c.fhe = enabled;
            c.name = base.name + (enabled ? "_fhe_on" : "_fhe_off");
            cells.push_back({enabled ? "fhe_on" : "fhe_off", base.fraction, std::move(c)});
        }
        break;
    }

    std::vector<RunSummary> summaries;
    summaries.reserve(cells.size());
    for (const auto& cell : cells) {
        summaries.push_back(run_experiment(cell.config, out_dir));
    }

    namespace fs = std::filesystem;
    const char* sweep_name = sweep == Sweep::Aggregators ? "aggregators"
                             : sweep == Sweep::Samplers  ? "samplers"
                             : sweep == Sweep::Settings  ? "settings"
                                                         : "fhe";
    const fs::path path = fs::path(out_dir) / (base.name + "_compare_" + sweep_name + ".csv");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# fingerprint=" << config_fingerprint(base) << '\n';
    out << "sweep,variant,fraction,seed,round,train_loss,test_loss_total,test_loss_label_-1,"
           "test_loss_label_0,test_loss_label_1,auc,ap,sireos\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (const auto& seed_result : summaries[i].per_seed) {
            for (const auto& r : seed_result.history.rounds) {
                out << sweep_name << ',' << cells[i].variant << ',' << fmt6(cells[i].fraction) << ','
                    << seed_result.seed << ',' << r.round << ',' << fmt6(r.train_loss) << ','
                    << fmt6(r.metrics.mean_loss_total) << ',' << fmt6(r.metrics.mean_loss_unknown)
                    << ',' << fmt6(r.metrics.mean_loss_negative) << ','
                    << fmt6(r.metrics.mean_loss_positive) << ',' << fmt6(r.metrics.auc) << ','
                    << fmt6(r.metrics.ap) << ',' << fmt6(r.metrics.sireos) << '\n';
            }
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
    return summaries;
}

} // namespace fedad
