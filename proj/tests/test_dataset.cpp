#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedad/dataset.hpp"
#include "fedad/metrics.hpp"

using namespace fedad;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / ("fedad_test_" + name);
    std::ofstream out(path);
    out << content;
    return path.string();
}

RawTable table_from(const std::string& csv) {
    std::istringstream in(csv);
    return parse_csv(in);
}

} // namespace

TEST_CASE("round-trip: save then reload reproduces the dataset exactly") {
    SyntheticSpec spec;
    spec.n_normal = 60;
    spec.n_anomaly = 20;
    spec.n_unknown = 15;
    spec.feature_count = 7;
    spec.k_clients = 3;
    Rng rng(8);
    const FederatedDataset original = generate_synthetic(spec, rng);
    const auto path = write_temp("roundtrip.csv", "");
    save_csv(original, path);
    const FederatedDataset reloaded = load_flamenco(path);

    REQUIRE(reloaded.clients.size() == original.clients.size());
    REQUIRE(reloaded.feature_count == original.feature_count);
    for (const auto& [client, data] : original.clients) {
        const auto& rdata = reloaded.clients.at(client);
        REQUIRE(rdata.train.size() == data.train.size());
        REQUIRE(rdata.eval.size() == data.eval.size());
        for (std::size_t i = 0; i < data.train.size(); ++i) {
            CHECK(rdata.train[i].case_id == data.train[i].case_id);
            CHECK(rdata.train[i].target == data.train[i].target);
            for (std::size_t f = 0; f < data.train[i].features.size(); ++f) {
                CHECK(std::abs(rdata.train[i].features[f] - data.train[i].features[f]) <= 1e-12);
            }
        }
        for (std::size_t i = 0; i < data.eval.size(); ++i) {
            CHECK(rdata.eval[i].case_id == data.eval[i].case_id);
            CHECK(rdata.eval[i].target == data.eval[i].target);
        }
    }
}

TEST_CASE("split: all label-0 cases train, eval ends up empty") {
    std::vector<Case> cases;
    for (int i = 0; i < 5; ++i) {
        cases.push_back({"x" + std::to_string(i), "c0", Target::Negative, {0.5, 0.5}});
    }
    const auto [train, eval] = split_train_test(cases, 0.5);
    CHECK(train.size() == 5);
    CHECK(eval.empty());
}

TEST_CASE("split: quantile 1.0 admits no unknown cases") {
    std::vector<Case> cases;
    cases.push_back({"n0", "c0", Target::Negative, {0.2}});
    cases.push_back({"n1", "c0", Target::Negative, {0.4}});
    cases.push_back({"u0", "c0", Target::Unknown, {0.99}});
    const auto [train, eval] = split_train_test(cases, 1.0);
    CHECK(train.size() == 2);
    REQUIRE(eval.size() == 1);
    CHECK(eval[0].case_id == "u0");
}

TEST_CASE("split: crafted six-case set matches the hand-computed admission") {
    // label-0 mean features: 0.2, 0.4, 0.6 -> sorted [0.2, 0.4, 0.6]
    // quantile 0.5 -> index floor(0.5 * 2) = 1 -> threshold 0.4
    std::vector<Case> cases;
    cases.push_back({"n0", "c0", Target::Negative, {0.2, 0.2}});
    cases.push_back({"n1", "c0", Target::Negative, {0.4, 0.4}});
    cases.push_back({"n2", "c0", Target::Negative, {0.6, 0.6}});
    cases.push_back({"u_low", "c0", Target::Unknown, {0.3, 0.3}});  // 0.3 < 0.4 -> eval
    cases.push_back({"u_high", "c0", Target::Unknown, {0.5, 0.5}}); // 0.5 >= 0.4 -> train
    cases.push_back({"p0", "c0", Target::Positive, {0.9, 0.9}});
    const auto [train, eval] = split_train_test(cases, 0.5);
    REQUIRE(train.size() == 4);
    CHECK(train[3].case_id == "u_high");
    REQUIRE(eval.size() == 2);
    CHECK(eval[0].case_id == "u_low");
    CHECK(eval[1].case_id == "p0");
}

TEST_CASE("split: no label-0 cases cannot derive a threshold") {
    std::vector<Case> cases = {{"u", "c0", Target::Unknown, {0.5}}};
    CHECK_THROWS_AS(split_train_test(cases, 0.5), DataError);
}

TEST_CASE("partition: 249 cases over 5 clients gives sizes 50,50,50,50,49") {
    std::vector<Case> cases;
    for (int i = 0; i < 249; ++i) {
        cases.push_back({"x" + std::to_string(i), "", Target::Negative, {0.5}});
    }
    Rng rng(4);
    const FederatedDataset ds = partition_equal(cases, 5, rng);
    REQUIRE(ds.clients.size() == 5);
    std::vector<std::size_t> sizes;
    for (const auto& [id, data] : ds.clients) sizes.push_back(data.train.size() + data.eval.size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{49, 50, 50, 50, 50});
}

TEST_CASE("partition: one client holds everything; same seed repeats exactly") {
    std::vector<Case> cases;
    for (int i = 0; i < 20; ++i) {
        cases.push_back({"x" + std::to_string(i), "", i % 4 == 0 ? Target::Positive : Target::Negative,
                         {0.1 * (i % 10)}});
    }
    Rng rng1(9);
    const FederatedDataset one = partition_equal(cases, 1, rng1);
    REQUIRE(one.clients.size() == 1);
    CHECK(one.case_count() == 20);

    Rng rng2(9), rng3(9);
    const FederatedDataset a = partition_equal(cases, 4, rng2);
    const FederatedDataset b = partition_equal(cases, 4, rng3);
    for (const auto& [id, data] : a.clients) {
        const auto& other = b.clients.at(id);
        REQUIRE(other.train.size() == data.train.size());
        for (std::size_t i = 0; i < data.train.size(); ++i) {
            CHECK(other.train[i].case_id == data.train[i].case_id);
        }
    }
    CHECK_THROWS_AS(partition_equal(cases, 0, rng1), ConfigError);
    CHECK_THROWS_AS(partition_equal(cases, 21, rng1), DataError);
}

TEST_CASE("synthetic: separation zero keeps anomalies statistically invisible") {
    SyntheticSpec spec;
    spec.n_normal = 150;
    spec.n_anomaly = 60;
    spec.separation = 0.0;
    spec.feature_count = 6;
    Rng rng(12);
    const FederatedDataset ds = generate_synthetic(spec, rng);
    // distance from the normal centroid as a trivial anomaly score
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& c : ds.all_eval()) {
        if (c.target == Target::Unknown) continue;
        double d = 0.0;
        for (double f : c.features) d += (f - 0.7) * (f - 0.7);
        scores.push_back(d);
        labels.push_back(c.target == Target::Positive ? 1 : 0);
    }
    const auto auc = auc_roc(scores, labels);
    REQUIRE(auc.has_value());
    CHECK(*auc > 0.4);
    CHECK(*auc < 0.6);
}

TEST_CASE("synthetic: no anomalies means eval holds only labels 0 and -1") {
    SyntheticSpec spec;
    spec.n_normal = 40;
    spec.n_anomaly = 0;
    spec.n_unknown = 10;
    spec.feature_count = 3;
    Rng rng(13);
    const FederatedDataset ds = generate_synthetic(spec, rng);
    for (const auto& c : ds.all_eval()) CHECK(c.target != Target::Positive);
}

TEST_CASE("synthetic: no train case ever carries a positive label") {
    Rng rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        SyntheticSpec spec;
        spec.n_normal = 30 + static_cast<int>(rng.uniform_int(50));
        spec.n_anomaly = static_cast<int>(rng.uniform_int(30));
        spec.n_unknown = static_cast<int>(rng.uniform_int(20));
        spec.feature_count = 2 + static_cast<int>(rng.uniform_int(6));
        spec.label_skew = rng.uniform(0, 0.9);
        spec.quantity_skew = rng.uniform(0, 0.9);
        spec.k_clients = 1 + static_cast<int>(rng.uniform_int(6));
        const FederatedDataset ds = generate_synthetic(spec, rng);
        for (const auto& c : ds.all_train()) CHECK(c.target != Target::Positive);
    }
}

TEST_CASE("synthetic: contaminated unknowns sit near the anomaly centroid") {
    SyntheticSpec spec;
    spec.n_normal = 10;
    spec.n_anomaly = 0;
    spec.n_unknown = 200;
    spec.feature_count = 4;
    spec.separation = 6.0;
    spec.k_clients = 1;
    spec.unknown_anomaly_fraction = 0.5;
    Rng rng(16);
    const FederatedDataset ds = generate_synthetic(spec, rng);
    std::size_t near_normal = 0, near_anomaly = 0;
    auto tally = [&](const Case& c) {
        if (c.target != Target::Unknown) return;
        double mean = 0.0;
        for (double f : c.features) mean += f;
        mean /= static_cast<double>(c.features.size());
        (mean > 0.55 ? near_normal : near_anomaly) += 1; // centroids 0.7 vs 0.4
    };
    for (const auto& c : ds.all_train()) tally(c);
    for (const auto& c : ds.all_eval()) tally(c);
    CHECK(near_normal + near_anomaly == 200);
    CHECK(near_normal > 60);
    CHECK(near_anomaly > 60);

    SyntheticSpec bad = spec;
    bad.unknown_anomaly_fraction = 1.5;
    CHECK_THROWS_AS(generate_synthetic(bad, rng), ConfigError);
}

TEST_CASE("synthetic: label skew concentrates positives on high-index clients") {
    SyntheticSpec spec;
    spec.n_normal = 100;
    spec.n_anomaly = 100;
    spec.feature_count = 3;
    spec.k_clients = 5;
    spec.label_skew = 0.9;
    Rng rng(15);
    const FederatedDataset ds = generate_synthetic(spec, rng);
    std::size_t last_client_positives = 0, first_client_positives = 0;
    for (const auto& c : ds.clients.at("c4").eval) {
        if (c.target == Target::Positive) ++last_client_positives;
    }
    for (const auto& c : ds.clients.at("c0").eval) {
        if (c.target == Target::Positive) ++first_client_positives;
    }
    CHECK(last_client_positives > first_client_positives);
}

TEST_CASE("flamenco load: client column is honored verbatim") {
    const std::string csv =
        "case_id,client_id,f0,f1,target\n"
        "a,clinicB,0.1,0.2,0\n"
        "b,clinicA,0.3,0.4,0\n"
        "c,clinicB,0.5,0.6,1\n";
    const auto path = write_temp("clients.csv", csv);
    const FederatedDataset ds = load_flamenco(path);
    REQUIRE(ds.clients.size() == 2);
    CHECK(ds.clients.count("clinicA") == 1);
    CHECK(ds.clients.count("clinicB") == 1);
    CHECK(ds.clients.at("clinicB").train.size() == 1);
    CHECK(ds.clients.at("clinicB").eval.size() == 1);
}

TEST_CASE("flamenco load: split column overrides the quantile rule") {
    const std::string csv =
        "case_id,client_id,f0,target,split\n"
        "a,c0,0.1,0,train\n"
        "b,c0,0.9,0,test\n"
        "c,c0,0.5,-1,train\n"
        "d,c0,0.7,1,test\n";
    const auto path = write_temp("split.csv", csv);
    const FederatedDataset ds = load_flamenco(path);
    CHECK(ds.clients.at("c0").train.size() == 2);
    CHECK(ds.clients.at("c0").eval.size() == 2);

    const std::string bad =
        "case_id,client_id,f0,target,split\n"
        "a,c0,0.1,1,train\n";
    CHECK_THROWS_AS(load_flamenco(write_temp("badsplit.csv", bad)), DataError);
}

TEST_CASE("flamenco load: out-of-range columns are min-max normalized") {
    const std::string csv =
        "case_id,client_id,score,target\n"
        "a,c0,20,0\n"
        "b,c0,60,0\n"
        "c,c0,100,1\n";
    const auto path = write_temp("scale.csv", csv);
    const FederatedDataset ds = load_flamenco(path, 0.0);
    std::vector<double> values;
    for (const auto& c : ds.all_train()) values.push_back(c.features[0]);
    for (const auto& c : ds.all_eval()) values.push_back(c.features[0]);
    std::sort(values.begin(), values.end());
    CHECK(values[0] == doctest::Approx(0.0));
    CHECK(values[1] == doctest::Approx(0.5));
    CHECK(values[2] == doctest::Approx(1.0));
}

TEST_CASE("flamenco load: error paths") {
    CHECK_THROWS_AS(load_csv("/nonexistent/path.csv", Schema::Flamenco), IoError);

    const auto empty = write_temp("empty.csv", "case_id,client_id,f0,target\n");
    CHECK_THROWS_AS(load_csv(empty, Schema::Flamenco), DataError);

    const auto missing = write_temp("missing.csv", "case_id,f0,target\na,0.1,0\n");
    CHECK_THROWS_AS(load_csv(missing, Schema::Flamenco), DataError);

    const auto bad_target =
        write_temp("badtarget.csv", "case_id,client_id,f0,target\na,c0,0.1,2\n");
    CHECK_THROWS_AS(load_flamenco(bad_target), DataError);

    const auto bad_cell =
        write_temp("badcell.csv", "case_id,client_id,f0,target\na,c0,oops,0\n");
    CHECK_THROWS_AS(load_flamenco(bad_cell), DataError);

    const auto dup = write_temp("dup.csv",
                                "case_id,client_id,f0,target\na,c0,0.1,0\na,c0,0.2,0\n");
    CHECK_THROWS_AS(load_flamenco(dup), DataError);
}

TEST_CASE("preprocess: one-hot groups sum to one per row") {
    const RawTable table = table_from(
        "answer,extra\n"
        "yes,1.0\n"
        "no,2.0\n"
        "yes,3.0\n");
    const std::vector<std::string> exclude;
    const auto pre = preprocess_columns(table, exclude);
    REQUIRE(pre.feature_names.size() == 3); // answer=no, answer=yes, extra
    for (std::size_t r = 0; r < 3; ++r) {
        double group_sum = 0.0;
        for (std::size_t f = 0; f < pre.feature_names.size(); ++f) {
            if (pre.feature_names[f].rfind("answer=", 0) == 0) group_sum += pre.features(r, f);
        }
        CHECK(group_sum == doctest::Approx(1.0));
    }
}

TEST_CASE("preprocess: numeric min-max and constant-column conventions") {
    const RawTable table = table_from("v,const\n2,7\n4,7\n6,7\n");
    const auto pre = preprocess_columns(table, std::vector<std::string>{});
    CHECK(pre.features(0, 0) == doctest::Approx(0.0));
    CHECK(pre.features(1, 0) == doctest::Approx(0.5));
    CHECK(pre.features(2, 0) == doctest::Approx(1.0));
    for (std::size_t r = 0; r < 3; ++r) CHECK(pre.features(r, 1) == 0.0);
}

TEST_CASE("asdtest preprocess: drops incomplete rows, maps yes/no targets") {
    const RawTable table = table_from(
        "A1,age,gender,Class/ASD\n"
        "1,4,m,YES\n"
        "0,6,f,NO\n"
        "1,?,m,YES\n"
        "0,5,f,no\n");
    const auto lm = preprocess_asdtest(table);
    REQUIRE(lm.targets.size() == 3); // the '?' row is gone
    CHECK(lm.targets[0] == 1);
    CHECK(lm.targets[1] == 0);
    CHECK(lm.targets[2] == 0);
    CHECK(lm.case_ids[2] == "asd_4"); // original row numbering survives
    for (std::size_t r = 0; r < lm.features.rows; ++r) {
        for (std::size_t f = 0; f < lm.features.cols; ++f) {
            CHECK(lm.features(r, f) >= 0.0);
            CHECK(lm.features(r, f) <= 1.0);
        }
    }

    const RawTable bad = table_from("A1,Class/ASD\n1,maybe\n");
    CHECK_THROWS_AS(preprocess_asdtest(bad), DataError);
}

TEST_CASE("csv parser: quoted cells and ragged rows") {
    const RawTable t = table_from("a,b\n\"x,y\",2\n");
    CHECK(t.rows[0][0] == "x,y");
    std::istringstream ragged("a,b\n1,2,3\n");
    CHECK_THROWS_AS(parse_csv(ragged), DataError);
}
