#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedad/matrix.hpp"
#include "fedad/rng.hpp"

namespace fedad {

enum class Target : int { Unknown = -1, Negative = 0, Positive = 1 };

Target target_from_int(int v);

// One screening record: normalized feature vector plus the clinician label
// (-1 unknown, 0 negative, 1 positive).
struct Case {
    std::string case_id;
    std::string client_id;
    Target target = Target::Unknown;
    std::vector<double> features;
};

struct ClientData {
    std::vector<Case> train;
    std::vector<Case> eval;
};

struct FederatedDataset {
    std::map<std::string, ClientData> clients; // ordered by client id for determinism
    int feature_count = 0;
    std::string name;

    std::vector<Case> all_train() const;
    std::vector<Case> all_eval() const;
    std::size_t case_count() const;
};

enum class Schema { Flamenco, AsdTest, Generic };

Schema schema_from_string(const std::string& s);

struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> index_of(const std::string& column) const;
};

// CSV with a header row; validates the columns the schema requires.
RawTable load_csv(const std::string& path, Schema schema);
RawTable parse_csv(std::istream& in);

// One-hot encodes non-numeric columns (fit on the full table), min-max
// normalizes numeric ones; constant columns map to 0. Rows containing '?'
// cells are rejected by load-time filtering, not imputed.
struct PreprocessedTable {
    Matrix features;
    std::vector<std::string> feature_names;
};
PreprocessedTable preprocess_columns(const RawTable& table, std::span<const std::string> exclude);

// Full ASDTest-style pipeline: every column except the target becomes a
// feature; the target column accepts yes/no or 0/1.
struct LabeledMatrix {
    Matrix features;
    std::vector<int> targets;
    std::vector<std::string> case_ids;
    std::vector<std::string> feature_names;
};
LabeledMatrix preprocess_asdtest(const RawTable& table);

// Presumed-normal split: train = all label-0 cases plus the unknown (-1)
// cases whose mean feature value reaches the given quantile of the label-0
// mean feature values; eval = everything else.
std::pair<std::vector<Case>, std::vector<Case>> split_train_test(std::span<const Case> cases,
                                                                 double presumed_normal_quantile);

// Shuffles and deals cases into k clients (sizes differ by at most one),
// then applies the presumed-normal split per client.
FederatedDataset partition_equal(std::vector<Case> cases, int k, Rng& rng,
                                 double presumed_normal_quantile = 0.5);

struct SyntheticSpec {
    int n_normal = 200;
    int n_anomaly = 60;
    int n_unknown = 40;
    int feature_count = 12;
    double separation = 5.0; // anomaly centroid shift in units of noise_sigma
    int k_clients = 5;
    double noise_sigma = 0.05;
    double label_skew = 0.0;    // 0 = uniform; near 1 concentrates positives on few clients
    double quantity_skew = 0.0; // same knob for overall case counts
    double train_fraction = 0.6;         // share of each client's label-0 cases used for training
    double unknown_train_fraction = 0.5; // share of unknown cases admitted to training
    // share of unknown cases secretly drawn from the anomaly distribution
    // (unlabeled contamination of the presumed-normal pool)
    double unknown_anomaly_fraction = 0.0;
};

// Normals cluster around a high-score centroid; anomalies sit `separation`
// noise standard deviations away; everything is clipped to [0,1].
FederatedDataset generate_synthetic(const SyntheticSpec& spec, Rng& rng);

// FLAMENCO-schema files: case_id, client_id, <features...>, target, optional
// split (train/test). A split column overrides the presumed-normal rule.
FederatedDataset load_flamenco(const std::string& path, double presumed_normal_quantile = 0.5);

// ASDTest-style files: preprocessed internally, then dealt into k clients.
FederatedDataset load_asdtest(const std::string& path, int k_clients, Rng& rng,
                              double presumed_normal_quantile = 0.5);

// Round-trippable dump in the FLAMENCO schema (includes the split column).
void save_csv(const FederatedDataset& dataset, const std::string& path);

} // namespace fedad
