#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedad/experiment.hpp"

namespace {

std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("FEDAD_OUT"); env && *env) return env;
    return "out";
}

void print_summary(const fedad::RunSummary& summary) {
    auto opt = [](const std::optional<double>& v) {
        return v ? std::to_string(*v) : std::string("undefined");
    };
    std::cout << "experiment " << summary.config.name << " (" << summary.per_seed.size()
              << " seeds, fingerprint " << summary.fingerprint << ")\n";
    std::cout << "  mean auc=" << opt(summary.across_seeds.mean.auc)
              << " ap=" << opt(summary.across_seeds.mean.ap)
              << " sireos=" << summary.across_seeds.mean.sireos << "\n";
    std::cout << "  wall " << summary.wall_seconds << "s\n";
    std::cout << "  summary: " << summary.summary_csv_path << "\n";
}

int run_command(const std::string& config_path, const std::string& out_flag) {
    const fedad::ExperimentConfig config = fedad::parse_config(config_path);
    const fedad::RunSummary summary = fedad::run_experiment(config, resolve_out_dir(out_flag));
    print_summary(summary);
    return 0;
}

int compare_command(const std::string& sweep_name, const std::string& config_path,
                    const std::string& out_flag) {
    const fedad::Sweep sweep = fedad::sweep_from_string(sweep_name);
    const fedad::ExperimentConfig base = fedad::parse_config(config_path);
    const auto summaries = fedad::run_compare(sweep, base, resolve_out_dir(out_flag));
    for (const auto& s : summaries) print_summary(s);
    return 0;
}

struct GenerateArgs {
    std::string out_path = "synthetic.csv";
    fedad::SyntheticSpec spec;
    std::uint64_t seed = 1;
};

int generate_command(const GenerateArgs& args) {
    fedad::Rng rng(fedad::derive_seed(args.seed, fedad::hash_bytes("datagen")));
    const fedad::FederatedDataset ds = fedad::generate_synthetic(args.spec, rng);
    fedad::save_csv(ds, args.out_path);
    std::cout << "wrote " << ds.case_count() << " cases (" << ds.feature_count << " features, "
              << ds.clients.size() << " clients) to " << args.out_path << "\n";
    return 0;
}

// scores.csv: header `score,label[,f0,f1,...]`; label -1 rows are excluded
// from auc/ap; sireos needs the feature columns.
int evaluate_command(const std::string& scores_path, const fedad::SireosParams& sireos_params) {
    std::ifstream in(scores_path);
    if (!in) throw fedad::IoError("cannot open " + scores_path);
    fedad::RawTable table = fedad::parse_csv(in);
    if (table.rows.empty()) throw fedad::DataError(scores_path + ": empty dataset (no data rows)");
    const auto score_col = table.index_of("score");
    const auto label_col = table.index_of("label");
    if (!score_col || !label_col) {
        throw fedad::DataError(scores_path + ": need 'score' and 'label' columns");
    }

    std::vector<double> all_scores;
    std::vector<double> labeled_scores;
    std::vector<int> labels;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c != *score_col && c != *label_col) feature_cols.push_back(c);
    }
    fedad::Matrix features(table.rows.size(), feature_cols.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const double score = std::stod(table.rows[r][*score_col]);
        const int label = std::stoi(table.rows[r][*label_col]);
        if (label != -1 && label != 0 && label != 1) {
            throw fedad::DataError("unknown label code: " + std::to_string(label));
        }
        all_scores.push_back(score);
        if (label != -1) {
            labeled_scores.push_back(score);
            labels.push_back(label);
        }
        for (std::size_t f = 0; f < feature_cols.size(); ++f) {
            features(r, f) = std::stod(table.rows[r][feature_cols[f]]);
        }
    }

    const auto auc = labels.empty() ? std::nullopt : fedad::auc_roc(labeled_scores, labels);
    const auto ap = labels.empty() ? std::nullopt : fedad::average_precision(labeled_scores, labels);
    std::cout << "auc=" << (auc ? std::to_string(*auc) : "undefined") << "\n";
    std::cout << "ap=" << (ap ? std::to_string(*ap) : "undefined") << "\n";
    if (!feature_cols.empty() && all_scores.size() >= 2) {
        std::cout << "sireos=" << fedad::sireos(all_scores, features, sireos_params) << "\n";
    } else {
        std::cout << "sireos=undefined\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated anomaly-detection simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, sweep_name, scores_path;

    auto* run = app.add_subcommand("run", "Run the experiment a config file describes");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory (overrides FEDAD_OUT)");

    auto* cmp = app.add_subcommand("compare", "Sweep one axis of a base config");
    cmp->add_option("sweep", sweep_name, "aggregators|samplers|settings|fhe")->required();
    cmp->add_option("config", config_path, "base config file")->required();
    cmp->add_option("--out", out_dir, "output directory (overrides FEDAD_OUT)");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset CSV");
    generate->add_option("--out", gen.out_path, "output csv path");
    generate->add_option("--normal", gen.spec.n_normal, "label-0 case count");
    generate->add_option("--anomaly", gen.spec.n_anomaly, "label-1 case count");
    generate->add_option("--unknown", gen.spec.n_unknown, "label -1 case count");
    generate->add_option("--features", gen.spec.feature_count, "feature count");
    generate->add_option("--separation", gen.spec.separation, "anomaly shift in noise sigmas");
    generate->add_option("--clients", gen.spec.k_clients, "client count");
    generate->add_option("--noise-sigma", gen.spec.noise_sigma, "feature noise sigma");
    generate->add_option("--label-skew", gen.spec.label_skew, "positive-label skew in [0,1)");
    generate->add_option("--quantity-skew", gen.spec.quantity_skew, "case-count skew in [0,1)");
    generate->add_option("--train-fraction", gen.spec.train_fraction, "label-0 train share");
    generate->add_option("--seed", gen.seed, "generation seed");

    fedad::SireosParams sireos_params;
    auto* evaluate = app.add_subcommand("evaluate", "Score a score/label CSV");
    evaluate->add_option("scores", scores_path, "csv with score,label[,features...]")->required();
    evaluate->add_option("--sireos-k", sireos_params.k, "sireos neighborhood size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_command(config_path, out_dir);
        if (cmp->parsed()) return compare_command(sweep_name, config_path, out_dir);
        if (generate->parsed()) return generate_command(gen);
        if (evaluate->parsed()) return evaluate_command(scores_path, sireos_params);
    } catch (const fedad::Error& e) {
        std::cerr << "error category=" << fedad::category_name(e.category())
                  << " message=" << e.what() << "\n";
        return fedad::category_exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error category=internal message=" << e.what() << "\n";
        return 70;
    }
    return 1;
}
