// Randomized invariant checks shared by the property test suite and the
// acceptance runner. Each check returns a list of violation descriptions;
// an empty list means the property held on every trial.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/report.hpp"
#include "oracles.hpp"

namespace props {

using namespace fedsim;

inline Dataset random_dataset(std::mt19937_64& rng, int num_classes, int min_per_class,
                              int max_per_class, int num_features) {
    std::uniform_int_distribution<int> count_dist(min_per_class, max_per_class);
    std::normal_distribution<double> coord(0.0, 1.0);
    Dataset ds;
    for (int c = 0; c < num_classes; ++c) {
        ds.class_names.push_back("class" + std::to_string(c));
    }
    for (int f = 0; f < num_features; ++f) {
        ds.feature_names.push_back("f" + std::to_string(f));
    }
    std::vector<int> counts;
    int total = 0;
    for (int c = 0; c < num_classes; ++c) {
        counts.push_back(count_dist(rng));
        total += counts.back();
    }
    ds.features = Matrix(total, num_features);
    Eigen::Index row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++row) {
            for (int f = 0; f < num_features; ++f) {
                // Offset per class so nearest neighbours tend to share a label.
                ds.features(row, f) = 3.0 * c + coord(rng);
            }
            ds.labels.push_back(c);
        }
    }
    return ds;
}

inline ModelParams random_model(std::mt19937_64& rng, const std::vector<LayerSpec>& specs) {
    ModelParams model = init_model(specs, rng());
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (Eigen::Index i = 0; i < model.flat.size(); ++i) {
        model.flat[i] += 0.5 * jitter(rng);
    }
    return model;
}

// Every CPM row is a probability distribution: non-negative entries that
// sum to one.
inline std::vector<std::string> check_cpm_rows_stochastic(int trials) {
    std::vector<std::string> failures;
    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(trial));
        std::uniform_int_distribution<int> nc_dist(2, 5);
        std::uniform_int_distribution<int> nf_dist(2, 6);
        const int nc = nc_dist(rng);
        const int nf = nf_dist(rng);
        const Dataset aux = random_dataset(rng, nc, 2, 5, nf);
        const auto specs = dense_stack(nf, {6}, nc);
        const ModelParams model = random_model(rng, specs);

        const ClassProbabilityMatrix cpm = compute_cpm(model, aux);
        if (cpm.prob.rows() != nc || cpm.prob.cols() != nc) {
            failures.push_back("trial " + std::to_string(trial) + ": CPM shape " +
                               std::to_string(cpm.prob.rows()) + "x" +
                               std::to_string(cpm.prob.cols()));
            continue;
        }
        for (Eigen::Index r = 0; r < cpm.prob.rows(); ++r) {
            const double sum = cpm.prob.row(r).sum();
            if (std::abs(sum - 1.0) > 1e-9) {
                failures.push_back("trial " + std::to_string(trial) + ": row " +
                                   std::to_string(r) + " sums to " + format_number(sum));
            }
            if (cpm.prob.row(r).minCoeff() < 0.0) {
                failures.push_back("trial " + std::to_string(trial) + ": row " +
                                   std::to_string(r) + " has a negative entry");
            }
        }
    }
    return failures;
}

// Partitioning hands every sample to exactly one client and respects the
// victim lists.
inline std::vector<std::string> check_partition_conserves(int trials) {
    std::vector<std::string> failures;
    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 rng(2000 + static_cast<std::uint64_t>(trial));
        std::uniform_int_distribution<int> nc_dist(2, 4);
        std::uniform_int_distribution<int> clients_dist(2, 5);
        const int nc = nc_dist(rng);
        const int clients = clients_dist(rng);
        const Dataset ds = random_dataset(rng, nc, 4, 20, 2);

        VictimMap victims(static_cast<std::size_t>(nc));
        std::vector<int> everyone(static_cast<std::size_t>(clients));
        std::iota(everyone.begin(), everyone.end(), 0);
        victims[0] = everyone;  // keeps every client covered
        std::uniform_int_distribution<int> pick(0, clients - 1);
        for (int c = 1; c < nc; ++c) {
            std::vector<int> ids = everyone;
            std::shuffle(ids.begin(), ids.end(), rng);
            ids.resize(static_cast<std::size_t>(1 + pick(rng) % clients));
            std::sort(ids.begin(), ids.end());
            victims[static_cast<std::size_t>(c)] = ids;
        }

        const auto parts = partition_by_victims(ds, victims, clients, 77 + trial);

        auto whole = oracle::row_multiset(ds);
        std::vector<std::pair<int, std::vector<double>>> merged;
        for (const auto& part : parts) {
            auto rows = oracle::row_multiset(part);
            merged.insert(merged.end(), rows.begin(), rows.end());
        }
        std::sort(merged.begin(), merged.end());
        if (merged != whole) {
            failures.push_back("trial " + std::to_string(trial) +
                               ": union of shards is not the original dataset");
        }
        for (std::size_t id = 0; id < parts.size(); ++id) {
            for (int label : parts[id].labels) {
                const auto& allowed = victims[static_cast<std::size_t>(label)];
                if (!std::binary_search(allowed.begin(), allowed.end(), static_cast<int>(id))) {
                    failures.push_back("trial " + std::to_string(trial) + ": client " +
                                       std::to_string(id) + " holds class " +
                                       std::to_string(label) + " outside its victim list");
                }
            }
        }
    }
    return failures;
}

// Every synthetic SMOTE sample lies on a segment between two real samples
// of its own class.
inline std::vector<std::string> check_smote_geometry(int trials) {
    std::vector<std::string> failures;
    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 rng(3000 + static_cast<std::uint64_t>(trial));
        const Dataset ds = random_dataset(rng, 2, 5, 12, 3);
        const std::vector<double> multipliers = {2.5, 3.0};
        const Dataset grown = smote_oversample(ds, multipliers, 3, 99 + trial);

        const Eigen::Index n = ds.features.rows();
        if (grown.features.topRows(n) != ds.features) {
            failures.push_back("trial " + std::to_string(trial) +
                               ": original rows were disturbed");
            continue;
        }
        auto by_class = ds.indices_by_class();
        for (Eigen::Index s = n; s < grown.features.rows(); ++s) {
            const int label = grown.labels[static_cast<std::size_t>(s)];
            const auto& members = by_class[static_cast<std::size_t>(label)];
            bool placed = false;
            for (std::size_t a = 0; a < members.size() && !placed; ++a) {
                for (std::size_t b = a; b < members.size() && !placed; ++b) {
                    placed = oracle::on_segment(grown.features.row(s),
                                                ds.features.row(members[a]),
                                                ds.features.row(members[b]), 1e-9);
                }
            }
            if (!placed) {
                failures.push_back("trial " + std::to_string(trial) + ": synthetic row " +
                                   std::to_string(s) + " lies off every class segment");
            }
        }
    }
    return failures;
}

// Reordering the uploads must not change the aggregate, and the per-client
// diagnostics must follow their clients.
inline std::vector<std::string> check_fedmade_permutation_equivariance(int trials) {
    std::vector<std::string> failures;
    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 rng(4000 + static_cast<std::uint64_t>(trial));
        std::uniform_int_distribution<int> k_dist(3, 6);
        const int k = k_dist(rng);
        const int nc = 3;
        const int nf = 4;
        const Dataset aux = random_dataset(rng, nc, 2, 4, nf);
        const auto specs = dense_stack(nf, {5}, nc);

        std::vector<ClientModel> base;
        for (int i = 0; i < k; ++i) {
            base.push_back({i, random_model(rng, specs)});
        }
        std::vector<ClientModel> shuffled = base;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);

        FedMadeParams params;
        const auto [model_a, diag_a] = fedmade_aggregate(base, aux, params);
        const auto [model_b, diag_b] = fedmade_aggregate(shuffled, aux, params);

        if (model_a.flat != model_b.flat) {
            failures.push_back("trial " + std::to_string(trial) +
                               ": aggregate depends on upload order");
        }
        for (std::size_t pos = 0; pos < shuffled.size(); ++pos) {
            const int id = shuffled[pos].client_id;
            if (diag_b.beta[pos] != diag_a.beta[static_cast<std::size_t>(id)]) {
                failures.push_back("trial " + std::to_string(trial) + ": beta of client " +
                                   std::to_string(id) + " moved under permutation");
            }
            if (diag_b.cluster_of[pos] != diag_a.cluster_of[static_cast<std::size_t>(id)]) {
                failures.push_back("trial " + std::to_string(trial) + ": cluster of client " +
                                   std::to_string(id) + " moved under permutation");
            }
        }
    }
    return failures;
}

// Serialize -> parse -> serialize is the identity on the canonical form.
inline std::vector<std::string> check_config_round_trip() {
    std::vector<std::string> failures;
    std::vector<ExperimentConfig> configs;

    ExperimentConfig synth;
    synth.algorithm = Algorithm::FedMade;
    synth.name = "props-synthetic";
    synth.rounds = 15;
    synth.sampling_rate = 0.5;
    synth.precision = TrainPrecision::F32;
    synth.hidden = {32, 16};
    synth.fedmade.eps = 0.4;
    synth.fedmade.resample_aux = true;
    synth.adversary.kind = AdversaryKind::ModelPoison;
    synth.adversary.compromised_fraction = 0.05;
    synth.adversary.lambda_scale = 20.0;
    synth.data.binary = true;
    synth.data.smote.per_class = {{"web", 4.0}};
    SyntheticSpec spec;
    spec.num_features = 3;
    spec.num_clients = 2;
    ClassSpec benign;
    benign.name = "benign";
    benign.count = 50;
    benign.victims = {0, 1};
    ClassSpec web;
    web.name = "web";
    web.count = 20;
    web.victims = {1};
    web.noise = 0.02;
    web.near_class = "benign";
    web.near_distance = 0.3;
    web.explicit_centers = {Vector::Constant(3, 0.25)};
    spec.classes = {benign, web};
    synth.data.synthetic = spec;
    configs.push_back(synth);

    ExperimentConfig csv;
    csv.algorithm = Algorithm::Scaffold;
    csv.name = "props-csv";
    csv.data.source = DataConfig::Source::Csv;
    csv.data.csv_path = "flows.csv";
    csv.data.csv_schema.label_column = "label";
    csv.data.csv_schema.feature_columns = {"bytes", "packets"};
    csv.data.csv_schema.class_names = {"benign", "ddos"};
    csv.data.csv_victims = {{0, 1, 2}, {2}};
    csv.data.csv_num_clients = 3;
    configs.push_back(csv);

    ExperimentConfig flip = synth;
    flip.name = "props-flip";
    flip.algorithm = Algorithm::FedProx;
    flip.fedprox_mu = 0.05;
    flip.adversary.kind = AdversaryKind::DataPoison;
    flip.adversary.direction = FlipDirection::BenignToAttack;
    flip.adversary.compromised_fraction = 0.35;
    flip.adversary.lambda_scale = 1.0;
    configs.push_back(flip);

    for (const auto& config : configs) {
        const std::string once = config_to_json(config);
        ExperimentConfig parsed;
        try {
            parsed = config_from_json(once);
        } catch (const std::exception& e) {
            failures.push_back(config.name + ": canonical form does not parse: " + e.what());
            continue;
        }
        const std::string twice = config_to_json(parsed);
        if (once != twice) {
            failures.push_back(config.name + ": serialized form drifts after one round trip");
        }
    }
    return failures;
}

// Two runs of the same experiment with deterministic clocks produce
// byte-identical report bundles.
inline std::vector<std::string> check_report_determinism() {
    std::vector<std::string> failures;

    ExperimentConfig config;
    config.name = "props-determinism";
    config.algorithm = Algorithm::FedMade;
    config.rounds = 2;
    config.local_epochs = 1;
    config.batch_size = 16;
    config.hidden = {8};
    config.seed = 5;
    config.fedmade.aux_per_class = 2;
    config.data.validation_per_class = 2;
    config.data.smote.enabled = false;
    SyntheticSpec spec;
    spec.num_features = 4;
    spec.num_clients = 2;
    ClassSpec benign;
    benign.name = "benign";
    benign.count = 60;
    benign.victims = {0, 1};
    ClassSpec flood;
    flood.name = "flood";
    flood.count = 60;
    flood.victims = {0, 1};
    spec.classes = {benign, flood};
    config.data.synthetic = spec;

    const auto root = std::filesystem::temp_directory_path() / "fedsim_props_determinism";
    std::filesystem::remove_all(root);
    const auto dir_a = root / "a";
    const auto dir_b = root / "b";

    FakeClock clock_a;
    const auto report_a = run_experiment(config, &clock_a);
    emit_report(report_a, dir_a.string());
    FakeClock clock_b;
    const auto report_b = run_experiment(config, &clock_b);
    emit_report(report_b, dir_b.string());

    for (const char* name : {"report.json", "rounds.csv", "final_metrics.csv"}) {
        std::ifstream in_a(dir_a / name, std::ios::binary);
        std::ifstream in_b(dir_b / name, std::ios::binary);
        if (!in_a || !in_b) {
            failures.push_back(std::string(name) + ": missing from one of the bundles");
            continue;
        }
        std::ostringstream buf_a, buf_b;
        buf_a << in_a.rdbuf();
        buf_b << in_b.rdbuf();
        if (buf_a.str() != buf_b.str()) {
            failures.push_back(std::string(name) + ": differs between identical runs");
        }
    }
    return failures;
}

}  // namespace props
