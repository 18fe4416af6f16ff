#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedad/experiment.hpp"

namespace py = pybind11;

namespace {

py::object metrics_to_dict(const fedad::MetricsReport& m) {
    py::dict d;
    d["auc"] = m.auc ? py::cast(*m.auc) : py::none();
    d["ap"] = m.ap ? py::cast(*m.ap) : py::none();
    d["sireos"] = m.sireos;
    d["mean_loss_total"] = m.mean_loss_total;
    d["mean_loss_unknown"] = m.mean_loss_unknown;
    d["mean_loss_negative"] = m.mean_loss_negative;
    d["mean_loss_positive"] = m.mean_loss_positive;
    return d;
}

py::dict summary_to_dict(const fedad::RunSummary& summary) {
    py::dict d;
    d["name"] = summary.config.name;
    d["fingerprint"] = summary.fingerprint;
    d["wall_seconds"] = summary.wall_seconds;
    py::list seeds;
    for (const auto& s : summary.per_seed) {
        py::dict row;
        row["seed"] = s.seed;
        row["final"] = metrics_to_dict(s.final_metrics);
        row["final_train_loss"] = s.final_train_loss;
        py::list rounds;
        for (const auto& r : s.history.rounds) {
            py::dict rd;
            rd["round"] = r.round;
            rd["train_loss"] = r.train_loss;
            rd["metrics"] = metrics_to_dict(r.metrics);
            rd["participants"] = r.participants;
            rounds.append(rd);
        }
        row["rounds"] = rounds;
        seeds.append(row);
    }
    d["per_seed"] = seeds;
    d["mean"] = metrics_to_dict(summary.across_seeds.mean);
    d["std"] = metrics_to_dict(summary.across_seeds.stddev);
    return d;
}

fedad::Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw fedad::DataError("empty feature matrix");
    fedad::Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols) throw fedad::ShapeError("ragged feature matrix");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i));
    }
    return m;
}

std::vector<fedad::RoundUpdate> to_updates(
    const std::vector<std::tuple<std::vector<double>, long, long>>& raw) {
    std::vector<fedad::RoundUpdate> updates;
    updates.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        fedad::RoundUpdate u;
        u.client_id = "u" + std::to_string(i);
        u.params = std::get<0>(raw[i]);
        u.num_samples = std::get<1>(raw[i]);
        u.local_steps = std::get<2>(raw[i]);
        updates.push_back(std::move(u));
    }
    return updates;
}

} // namespace

PYBIND11_MODULE(_fedad, m) {
    m.doc() = "Federated anomaly-detection simulator core";

    py::register_exception<fedad::Error>(m, "FedadError");

    m.def(
        "auc_roc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) -> py::object {
            const auto v = fedad::auc_roc(scores, labels);
            return v ? py::cast(*v) : py::none();
        },
        py::arg("scores"), py::arg("labels"),
        "Mann-Whitney AUC with midrank tie handling; None for single-class input.");

    m.def(
        "average_precision",
        [](const std::vector<double>& scores, const std::vector<int>& labels) -> py::object {
            const auto v = fedad::average_precision(scores, labels);
            return v ? py::cast(*v) : py::none();
        },
        py::arg("scores"), py::arg("labels"));

    m.def(
        "sireos",
        [](const std::vector<double>& scores, const std::vector<std::vector<double>>& features,
           int k, double bandwidth_percentile) {
            fedad::SireosParams params{k, bandwidth_percentile};
            return fedad::sireos(scores, to_matrix(features), params);
        },
        py::arg("scores"), py::arg("features"), py::arg("k") = 10,
        py::arg("bandwidth_percentile") = 1.0);

    m.def(
        "aggregate",
        [](const std::string& id, const std::vector<double>& global,
           const std::vector<std::tuple<std::vector<double>, long, long>>& updates) {
            auto agg = fedad::make_aggregator(id);
            agg->reset(global.size());
            return agg->aggregate(global, to_updates(updates));
        },
        py::arg("id"), py::arg("global_params"), py::arg("updates"),
        "One aggregation step; updates are (params, num_samples, local_steps) tuples.");

    m.def("aggregator_ids", [] { return fedad::aggregator_ids(); });
    m.def("sampler_ids", [] { return fedad::sampler_ids(); });

    m.def(
        "generate_synthetic_csv",
        [](const std::string& path, int n_normal, int n_anomaly, int n_unknown, int feature_count,
           double separation, int k_clients, double label_skew, double quantity_skew,
           std::uint64_t seed) {
            fedad::SyntheticSpec spec;
            spec.n_normal = n_normal;
            spec.n_anomaly = n_anomaly;
            spec.n_unknown = n_unknown;
            spec.feature_count = feature_count;
            spec.separation = separation;
            spec.k_clients = k_clients;
            spec.label_skew = label_skew;
            spec.quantity_skew = quantity_skew;
            fedad::Rng rng(fedad::derive_seed(seed, fedad::hash_bytes("datagen")));
            fedad::save_csv(fedad::generate_synthetic(spec, rng), path);
        },
        py::arg("path"), py::arg("n_normal") = 200, py::arg("n_anomaly") = 60,
        py::arg("n_unknown") = 40, py::arg("feature_count") = 12, py::arg("separation") = 5.0,
        py::arg("k_clients") = 5, py::arg("label_skew") = 0.0, py::arg("quantity_skew") = 0.0,
        py::arg("seed") = 1);

    m.def(
        "run_experiment",
        [](const std::string& config_path, const std::string& out_dir) {
            const auto config = fedad::parse_config(config_path);
            return summary_to_dict(fedad::run_experiment(config, out_dir));
        },
        py::arg("config_path"), py::arg("out_dir"));

    m.def(
        "run_config_text",
        [](const std::string& text) {
            const auto config = fedad::parse_config_text(text);
            return summary_to_dict(fedad::run_experiment_in_memory(config));
        },
        py::arg("text"), "Run an experiment from config text without writing files.");

    m.def("config_fingerprint", [](const std::string& text) {
        return fedad::config_fingerprint(fedad::parse_config_text(text));
    });

    // encrypted-averaging demo surface
    py::class_<fedad::he::HEKeys>(m, "HEKeys");
    py::class_<fedad::he::CipherVector>(m, "CipherVector")
        .def("to_bytes",
             [](const fedad::he::CipherVector& c) {
                 const auto bytes = c.to_bytes();
                 return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
             })
        .def_property_readonly("plaintext_length", &fedad::he::CipherVector::plaintext_length);

    m.def(
        "he_keygen",
        [](std::uint64_t seed) {
            fedad::Rng rng(seed);
            return fedad::he::keygen({}, rng);
        },
        py::arg("seed"));
    m.def(
        "he_encrypt",
        [](const std::vector<double>& v, const fedad::he::HEKeys& keys, std::uint64_t seed) {
            fedad::Rng rng(seed);
            return fedad::he::encrypt(v, keys, rng);
        },
        py::arg("values"), py::arg("keys"), py::arg("seed"));
    m.def(
        "he_decrypt",
        [](const fedad::he::CipherVector& c, const fedad::he::HEKeys& keys) {
            return fedad::he::decrypt(c, keys);
        },
        py::arg("cipher"), py::arg("keys"));
    m.def(
        "secure_fedavg",
        [](const std::vector<std::pair<fedad::he::CipherVector, long>>& updates) {
            return fedad::he::secure_fedavg(updates);
        },
        py::arg("updates"));
}
