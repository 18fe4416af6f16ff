#include "fedad/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace fedad {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(out);
}

bool is_missing(const std::string& cell) {
    const std::string t = trim(cell);
    return t.empty() || t == "?";
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// One CSV record, RFC-4180 style quoting.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

double column_min(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }
double column_max(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

} // namespace

Target target_from_int(int v) {
    switch (v) {
    case -1: return Target::Unknown;
    case 0: return Target::Negative;
    case 1: return Target::Positive;
    default: throw DataError("unknown target code: " + std::to_string(v));
    }
}

std::vector<Case> FederatedDataset::all_train() const {
    std::vector<Case> out;
    for (const auto& [id, data] : clients) out.insert(out.end(), data.train.begin(), data.train.end());
    return out;
}

std::vector<Case> FederatedDataset::all_eval() const {
    std::vector<Case> out;
    for (const auto& [id, data] : clients) out.insert(out.end(), data.eval.begin(), data.eval.end());
    return out;
}

std::size_t FederatedDataset::case_count() const {
    std::size_t n = 0;
    for (const auto& [id, data] : clients) n += data.train.size() + data.eval.size();
    return n;
}

Schema schema_from_string(const std::string& s) {
    const std::string k = lower(trim(s));
    if (k == "flamenco") return Schema::Flamenco;
    if (k == "asdtest") return Schema::AsdTest;
    if (k == "generic" || k == "csv") return Schema::Generic;
    throw ConfigError("unknown dataset schema: " + s);
}

std::optional<std::size_t> RawTable::index_of(const std::string& column) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == column) return i;
    }
    return std::nullopt;
}

RawTable parse_csv(std::istream& in) {
    RawTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: missing header row");
    table.columns = split_csv_line(line);
    for (auto& c : table.columns) c = trim(c);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != table.columns.size()) {
            throw DataError("csv: row " + std::to_string(table.rows.size() + 2) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(table.columns.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

RawTable load_csv(const std::string& path, Schema schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    RawTable table = parse_csv(in);
    if (table.rows.empty()) throw DataError(path + ": empty dataset (no data rows)");
    if (schema == Schema::Flamenco) {
        for (const char* required : {"case_id", "client_id", "target"}) {
            if (!table.index_of(required)) {
                throw DataError(path + ": missing required column '" + required + "'");
            }
        }
        if (table.columns.size() < 4) throw DataError(path + ": no feature columns");
    } else if (schema == Schema::AsdTest) {
        if (table.columns.size() < 2) throw DataError(path + ": need at least one feature and a target");
    }
    return table;
}

PreprocessedTable preprocess_columns(const RawTable& table, std::span<const std::string> exclude) {
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (std::find(exclude.begin(), exclude.end(), table.columns[c]) == exclude.end()) {
            keep.push_back(c);
        }
    }
    if (keep.empty()) throw DataError("preprocess: no feature columns left");
    const std::size_t n = table.rows.size();
    if (n == 0) throw DataError("preprocess: empty table");

    PreprocessedTable out;
    std::vector<std::vector<double>> feature_cols;

    for (std::size_t c : keep) {
        std::vector<double> numeric(n);
        bool all_numeric = true;
        for (std::size_t r = 0; r < n; ++r) {
            if (!parse_double(table.rows[r][c], numeric[r])) {
                all_numeric = false;
                break;
            }
        }
        if (all_numeric) {
            const double lo = column_min(numeric);
            const double hi = column_max(numeric);
            const double range = hi - lo;
            for (auto& v : numeric) v = range > 0.0 ? (v - lo) / range : 0.0;
            feature_cols.push_back(std::move(numeric));
            out.feature_names.push_back(table.columns[c]);
        } else {
            // one-hot over the distinct values seen in the full table
            std::set<std::string> values;
            for (std::size_t r = 0; r < n; ++r) values.insert(trim(table.rows[r][c]));
            for (const auto& value : values) {
                std::vector<double> col(n, 0.0);
                for (std::size_t r = 0; r < n; ++r) {
                    if (trim(table.rows[r][c]) == value) col[r] = 1.0;
                }
                feature_cols.push_back(std::move(col));
                out.feature_names.push_back(table.columns[c] + "=" + value);
            }
        }
    }

    out.features = Matrix(n, feature_cols.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < feature_cols.size(); ++f) out.features(r, f) = feature_cols[f][r];
    }
    return out;
}

LabeledMatrix preprocess_asdtest(const RawTable& table) {
    // find the target column: a name containing "class" or exactly "target",
    // otherwise the last column
    std::size_t target_col = table.columns.size() - 1;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const std::string name = lower(table.columns[c]);
        if (name.find("class") != std::string::npos || name == "target") {
            target_col = c;
            break;
        }
    }

    // reject rows with missing cells
    RawTable complete;
    complete.columns = table.columns;
    std::vector<std::size_t> kept_rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        bool missing = false;
        for (const auto& cell : table.rows[r]) {
            if (is_missing(cell)) {
                missing = true;
                break;
            }
        }
        if (!missing) {
            complete.rows.push_back(table.rows[r]);
            kept_rows.push_back(r);
        }
    }
    if (complete.rows.empty()) throw DataError("asdtest: all rows have missing values");

    LabeledMatrix out;
    out.targets.reserve(complete.rows.size());
    for (std::size_t r = 0; r < complete.rows.size(); ++r) {
        const std::string raw = lower(trim(complete.rows[r][target_col]));
        int label = 0;
        if (raw == "yes" || raw == "1") {
            label = 1;
        } else if (raw == "no" || raw == "0") {
            label = 0;
        } else {
            throw DataError("asdtest: unknown target code '" + raw + "'");
        }
        out.targets.push_back(label);
        out.case_ids.push_back("asd_" + std::to_string(kept_rows[r] + 1));
    }

    const std::string exclude[] = {table.columns[target_col]};
    PreprocessedTable pre = preprocess_columns(complete, exclude);
    out.features = std::move(pre.features);
    out.feature_names = std::move(pre.feature_names);
    return out;
}

std::pair<std::vector<Case>, std::vector<Case>> split_train_test(std::span<const Case> cases,
                                                                 double presumed_normal_quantile) {
    if (presumed_normal_quantile < 0.0 || presumed_normal_quantile > 1.0) {
        throw ConfigError("presumed-normal quantile must be in [0,1]");
    }
    std::vector<double> normal_means;
    for (const auto& c : cases) {
        if (c.target == Target::Negative) {
            double acc = 0.0;
            for (double f : c.features) acc += f;
            normal_means.push_back(acc / static_cast<double>(c.features.size()));
        }
    }
    if (normal_means.empty()) {
        throw DataError("split: no label-0 cases to derive the presumed-normal threshold from");
    }
    double threshold;
    if (presumed_normal_quantile >= 1.0) {
        // boundary convention: quantile 1.0 admits nothing
        threshold = std::numeric_limits<double>::infinity();
    } else {
        std::sort(normal_means.begin(), normal_means.end());
        const auto idx = static_cast<std::size_t>(std::floor(
            presumed_normal_quantile * static_cast<double>(normal_means.size() - 1)));
        threshold = normal_means[idx];
    }

    std::vector<Case> train, eval;
    for (const auto& c : cases) {
        if (c.target == Target::Negative) {
            train.push_back(c);
        } else if (c.target == Target::Unknown) {
            double acc = 0.0;
            for (double f : c.features) acc += f;
            const double mean = acc / static_cast<double>(c.features.size());
            (mean >= threshold ? train : eval).push_back(c);
        } else {
            eval.push_back(c);
        }
    }
    return {std::move(train), std::move(eval)};
}

FederatedDataset partition_equal(std::vector<Case> cases, int k, Rng& rng,
                                 double presumed_normal_quantile) {
    if (k < 1) throw ConfigError("partition: client count must be >= 1");
    if (static_cast<std::size_t>(k) > cases.size()) {
        throw DataError("partition: more clients than cases");
    }
    rng.shuffle(cases);

    std::vector<std::vector<Case>> buckets(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < cases.size(); ++i) {
        Case c = std::move(cases[i]);
        c.client_id = "c" + std::to_string(i % static_cast<std::size_t>(k));
        buckets[i % static_cast<std::size_t>(k)].push_back(std::move(c));
    }

    FederatedDataset ds;
    ds.name = "partitioned";
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        auto [train, eval] = split_train_test(buckets[b], presumed_normal_quantile);
        ClientData data{std::move(train), std::move(eval)};
        ds.clients.emplace("c" + std::to_string(b), std::move(data));
    }
    if (!buckets.empty() && !buckets[0].empty()) {
        ds.feature_count = static_cast<int>(buckets[0][0].features.size());
    }
    return ds;
}

FederatedDataset generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
    if (spec.feature_count < 1) throw ConfigError("synthetic: feature_count must be >= 1");
    if (spec.k_clients < 1) throw ConfigError("synthetic: k_clients must be >= 1");
    if (spec.n_normal < 0 || spec.n_anomaly < 0 || spec.n_unknown < 0) {
        throw ConfigError("synthetic: counts must be >= 0");
    }
    if (spec.separation < 0.0) throw ConfigError("synthetic: separation must be >= 0");
    if (spec.label_skew < 0.0 || spec.label_skew >= 1.0 || spec.quantity_skew < 0.0 ||
        spec.quantity_skew >= 1.0) {
        throw ConfigError("synthetic: skew knobs must be in [0,1)");
    }
    if (spec.unknown_anomaly_fraction < 0.0 || spec.unknown_anomaly_fraction > 1.0) {
        throw ConfigError("synthetic: unknown_anomaly_fraction must be in [0,1]");
    }

    const int k = spec.k_clients;
    const double normal_center = 0.7;
    const double anomaly_center = normal_center - spec.separation * spec.noise_sigma;

    // quantity skew biases everything toward low-index clients, label skew
    // biases positives toward high-index clients
    std::vector<double> base_weights(static_cast<std::size_t>(k));
    std::vector<double> positive_weights(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        base_weights[static_cast<std::size_t>(i)] = std::pow(1.0 - spec.quantity_skew, i);
        positive_weights[static_cast<std::size_t>(i)] = std::pow(1.0 - spec.label_skew, k - 1 - i);
    }

    auto draw_client = [&](const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = rng.uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            r -= weights[i];
            if (r < 0.0) return static_cast<int>(i);
        }
        return k - 1;
    };

    auto sample_features = [&](double center) {
        std::vector<double> f(static_cast<std::size_t>(spec.feature_count));
        for (auto& v : f) v = std::clamp(center + spec.noise_sigma * rng.normal(), 0.0, 1.0);
        return f;
    };

    std::vector<std::vector<Case>> normals(static_cast<std::size_t>(k));
    std::vector<std::vector<Case>> anomalies(static_cast<std::size_t>(k));
    std::vector<std::vector<Case>> unknowns(static_cast<std::size_t>(k));
    char id_buf[32];
    for (int i = 0; i < spec.n_normal; ++i) {
        const int cl = draw_client(base_weights);
        std::snprintf(id_buf, sizeof(id_buf), "n%05d", i + 1);
        normals[static_cast<std::size_t>(cl)].push_back(
            {id_buf, "c" + std::to_string(cl), Target::Negative, sample_features(normal_center)});
    }
    for (int i = 0; i < spec.n_anomaly; ++i) {
        const int cl = draw_client(positive_weights);
        std::snprintf(id_buf, sizeof(id_buf), "a%05d", i + 1);
        anomalies[static_cast<std::size_t>(cl)].push_back(
            {id_buf, "c" + std::to_string(cl), Target::Positive, sample_features(anomaly_center)});
    }
    for (int i = 0; i < spec.n_unknown; ++i) {
        // contaminated unknowns are unlabeled positives, so they follow the
        // positive-label skew; clean ones follow the bulk of the data
        const bool contaminated = rng.uniform() < spec.unknown_anomaly_fraction;
        const int cl = draw_client(contaminated ? positive_weights : base_weights);
        std::snprintf(id_buf, sizeof(id_buf), "u%05d", i + 1);
        unknowns[static_cast<std::size_t>(cl)].push_back(
            {id_buf, "c" + std::to_string(cl), Target::Unknown,
             sample_features(contaminated ? anomaly_center : normal_center)});
    }

    FederatedDataset ds;
    ds.name = "synthetic";
    ds.feature_count = spec.feature_count;
    for (int cl = 0; cl < k; ++cl) {
        ClientData data;
        const auto& ns = normals[static_cast<std::size_t>(cl)];
        const auto& us = unknowns[static_cast<std::size_t>(cl)];
        const auto n_train =
            static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(ns.size())));
        const auto u_train = static_cast<std::size_t>(
            std::llround(spec.unknown_train_fraction * static_cast<double>(us.size())));
        for (std::size_t i = 0; i < ns.size(); ++i) {
            (i < n_train ? data.train : data.eval).push_back(ns[i]);
        }
        for (std::size_t i = 0; i < us.size(); ++i) {
            (i < u_train ? data.train : data.eval).push_back(us[i]);
        }
        for (const auto& a : anomalies[static_cast<std::size_t>(cl)]) data.eval.push_back(a);
        ds.clients.emplace("c" + std::to_string(cl), std::move(data));
    }
    return ds;
}

namespace {

struct ParsedRow {
    Case c;
    std::optional<bool> in_train; // from the split column, when present
};

int parse_target_cell(const std::string& cell) {
    double v = 0.0;
    if (!parse_double(cell, v) || v != std::floor(v)) {
        throw DataError("target cell is not an integer: '" + cell + "'");
    }
    return static_cast<int>(v);
}

} // namespace

FederatedDataset load_flamenco(const std::string& path, double presumed_normal_quantile) {
    RawTable table = load_csv(path, Schema::Flamenco);
    const std::size_t id_col = *table.index_of("case_id");
    const std::size_t client_col = *table.index_of("client_id");
    const std::size_t target_col = *table.index_of("target");
    const std::optional<std::size_t> split_col = table.index_of("split");

    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c != id_col && c != client_col && c != target_col &&
            (!split_col || c != *split_col)) {
            feature_cols.push_back(c);
        }
    }
    if (feature_cols.empty()) throw DataError(path + ": no feature columns");

    // column-wise normalization: a column already inside [0,1] is kept
    // verbatim (round-trip safety), anything else is min-max scaled
    const std::size_t n = table.rows.size();
    Matrix features(n, feature_cols.size());
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
        std::vector<double> col(n);
        for (std::size_t r = 0; r < n; ++r) {
            if (!parse_double(table.rows[r][feature_cols[f]], col[r])) {
                throw DataError(path + ": non-numeric indicator cell in column '" +
                                table.columns[feature_cols[f]] + "', row " + std::to_string(r + 2));
            }
        }
        const double lo = column_min(col);
        const double hi = column_max(col);
        if (lo < 0.0 || hi > 1.0) {
            const double range = hi - lo;
            for (auto& v : col) v = range > 0.0 ? (v - lo) / range : 0.0;
        }
        for (std::size_t r = 0; r < n; ++r) features(r, f) = col[r];
    }

    std::vector<ParsedRow> rows;
    rows.reserve(n);
    std::set<std::string> seen_ids;
    for (std::size_t r = 0; r < n; ++r) {
        ParsedRow row;
        row.c.case_id = trim(table.rows[r][id_col]);
        row.c.client_id = trim(table.rows[r][client_col]);
        row.c.target = target_from_int(parse_target_cell(table.rows[r][target_col]));
        row.c.features.assign(features.row(r), features.row(r) + features.cols);
        if (!seen_ids.insert(row.c.case_id).second) {
            throw DataError(path + ": duplicate case_id '" + row.c.case_id + "'");
        }
        if (split_col) {
            const std::string s = lower(trim(table.rows[r][*split_col]));
            if (s == "train") {
                row.in_train = true;
            } else if (s == "test" || s == "eval") {
                row.in_train = false;
            } else {
                throw DataError(path + ": unknown split value '" + s + "'");
            }
        }
        rows.push_back(std::move(row));
    }

    FederatedDataset ds;
    ds.name = "flamenco";
    ds.feature_count = static_cast<int>(feature_cols.size());

    if (split_col) {
        for (auto& row : rows) {
            if (*row.in_train && row.c.target == Target::Positive) {
                throw DataError(path + ": split column places a positive case in train (" +
                                row.c.case_id + ")");
            }
            auto& data = ds.clients[row.c.client_id];
            (*row.in_train ? data.train : data.eval).push_back(std::move(row.c));
        }
    } else {
        std::map<std::string, std::vector<Case>> by_client;
        for (auto& row : rows) by_client[row.c.client_id].push_back(std::move(row.c));
        for (auto& [client, cases] : by_client) {
            auto [train, eval] = split_train_test(cases, presumed_normal_quantile);
            ds.clients.emplace(client, ClientData{std::move(train), std::move(eval)});
        }
    }
    return ds;
}

FederatedDataset load_asdtest(const std::string& path, int k_clients, Rng& rng,
                              double presumed_normal_quantile) {
    RawTable table = load_csv(path, Schema::AsdTest);
    LabeledMatrix lm = preprocess_asdtest(table);
    std::vector<Case> cases;
    cases.reserve(lm.targets.size());
    for (std::size_t r = 0; r < lm.targets.size(); ++r) {
        Case c;
        c.case_id = lm.case_ids[r];
        c.target = target_from_int(lm.targets[r]);
        c.features.assign(lm.features.row(r), lm.features.row(r) + lm.features.cols);
        cases.push_back(std::move(c));
    }
    FederatedDataset ds = partition_equal(std::move(cases), k_clients, rng, presumed_normal_quantile);
    ds.name = "asdtest";
    return ds;
}

void save_csv(const FederatedDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "case_id,client_id";
    for (int f = 0; f < dataset.feature_count; ++f) out << ",f" << f;
    out << ",target,split\n";
    char buf[40];
    auto write_case = [&](const Case& c, const char* split) {
        out << c.case_id << ',' << c.client_id;
        for (double v : c.features) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << ',' << static_cast<int>(c.target) << ',' << split << '\n';
    };
    for (const auto& [client, data] : dataset.clients) {
        for (const auto& c : data.train) write_case(c, "train");
        for (const auto& c : data.eval) write_case(c, "test");
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace fedad
