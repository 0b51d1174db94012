#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/attacks.hpp"
#include "fedsim/common.hpp"
#include "fedsim/data.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/nn.hpp"

namespace fedsim {

enum class Algorithm { FedAvg, FedProx, Scaffold, FedMade };

std::string algorithm_name(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);  // throws ConfigError

struct SmoteConfig {
    bool enabled = true;
    int k = 5;
    double default_multiplier = 2.0;
    std::map<std::string, double> per_class;  // class name -> multiplier

    double multiplier_for(const std::string& class_name) const;
};

struct DataConfig {
    enum class Source { Synthetic, Csv };

    Source source = Source::Synthetic;
    SyntheticSpec synthetic;  // its seed field is ignored; experiments derive one

    std::string csv_path;
    CsvSchema csv_schema;
    VictimMap csv_victims;  // class index -> client ids, same shape as synthetic victims
    int csv_num_clients = 0;

    bool binary = false;  // collapse labels to benign/attack after partitioning
    double train_fraction = 0.8;
    int validation_per_class = 100;  // capped by availability
    SmoteConfig smote;

    int num_clients() const;
    void validate() const;
};

struct FedMadeConfig {
    double eps = 0.0;  // <= 0 selects the default 0.3 * sqrt(N_C)
    int min_pts = 2;
    int solver_iters = 500;
    double solver_lr = 0.01;
    int aux_per_class = 10;  // server-held samples per class for the CPMs
    // Redraw the round's CPM sample from the server's held-out pool (aux +
    // validation) each round instead of reusing the fixed aux set.
    bool resample_aux = false;
};

struct ExperimentConfig {
    int schema_version = 1;
    std::string name = "experiment";
    Algorithm algorithm = Algorithm::FedAvg;
    int rounds = 1;
    double sampling_rate = 1.0;  // fraction of clients drawn each round
    int local_epochs = 2;
    double client_lr = 5e-4;
    int batch_size = 64;
    bool shuffle_each_epoch = true;
    TrainPrecision precision = TrainPrecision::F64;
    double fedprox_mu = 0.1;             // fedprox only
    std::vector<int> hidden = {50, 25};  // dense widths between input and softmax
    DataConfig data;
    FedMadeConfig fedmade;
    AdversaryConfig adversary;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    void validate() const;  // throws ConfigError naming field and constraint
};

struct ClientState {
    int client_id = 0;
    Dataset dataset;  // scaled, oversampled, possibly collapsed/poisoned
    std::optional<Vector> variate;  // control variate; present iff algorithm is scaffold
    AdversaryKind role = AdversaryKind::None;
};

struct FedMadeRoundInfo {
    int num_clusters = 0;
    std::vector<double> alpha;    // per cluster
    std::vector<double> beta;     // aligned with participants
    std::vector<int> cluster_of;  // aligned with participants
    double residual = 0.0;
    bool fallback_uniform = false;
};

struct RoundRecord {
    int round = 0;                  // 1-based
    std::vector<int> participants;  // aggregated clients, ascending id
    std::vector<int> failed;        // sampled but isolated by numerical failure
    // Sampling through aggregation; validation is excluded so the number
    // reflects what changes between algorithms.
    double duration_seconds = 0.0;
    double val_accuracy = 0.0;
    std::vector<double> val_per_class_accuracy;
    double val_precision = 0.0;
    double val_recall = 0.0;
    double val_f1 = 0.0;
    std::optional<FedMadeRoundInfo> fedmade;
};

struct EvalResult {
    ConfusionMatrix confusion;
    MetricsSummary metrics;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<std::string> class_names;
    std::vector<RoundRecord> rounds;
    int best_round = 0;  // 1-based; 0 when no round completed
    double best_val_accuracy = 0.0;
    EvalResult test;  // best model evaluated on the held-out test split
    double total_wall_seconds = 0.0;
    bool aborted = false;
    std::string abort_reason;
    ModelParams best_model;  // in-memory only, never serialized
};

struct PreparedExperiment {
    std::vector<ClientState> clients;
    Dataset aux;         // server-held, drives the class-probability matrices
    Dataset validation;  // best-model selection
    Dataset test;        // final evaluation only
    std::vector<LayerSpec> model_specs;
    std::vector<int> compromised;  // ascending client ids
};

// Data pipeline: load or generate, stratified split, min-max scaling fitted
// on the training side, server aux/validation carve-out, victim partition,
// per-client oversampling, optional binary collapse, then label flips on
// compromised clients. Clients never hold server-side samples.
PreparedExperiment prepare_experiment(const ExperimentConfig& config);

// floor(gamma * n) ids, at least one, drawn without replacement; ascending.
std::vector<int> sample_clients(const std::vector<int>& all_ids, double gamma,
                                std::mt19937_64& rng);

struct LocalUpdateResult {
    ModelParams model;
    long steps = 0;
    std::optional<Vector> variate_delta;  // scaffold only
};

// One client's round: fresh optimizer, local epochs from the global model.
// FedProx anchors the proximal term at the round's global model; scaffold
// applies the variate correction each step and updates the client variate
// (variate <- variate - server + (global - local) / (steps * lr)).
LocalUpdateResult local_update(const ModelParams& global, ClientState& client,
                               const ExperimentConfig& config, int round,
                               const Vector* server_variate);

// Row-wise argmax; ties resolve to the lowest class index.
std::vector<int> predict(const ModelParams& model, const Matrix& features);

// Confusion matrix plus summary metrics. Binary datasets report
// precision/recall/F1 on the attack class; multiclass reports macro averages
// and marks that with positive_class = -1.
EvalResult evaluate(const ModelParams& model, const Dataset& dataset);

using RoundCallback = std::function<void(const RoundRecord&)>;

// Full round loop: sample, broadcast, local updates (adversaries applied),
// aggregate per algorithm, validate, retain the best model by overall
// validation accuracy. A null clock means wall time; on_round fires after
// each completed round. Unrecoverable round errors return a partial report
// with the abort flag set.
ExperimentReport run_experiment(const ExperimentConfig& config, Clock* clock = nullptr,
                                const RoundCallback& on_round = {});

}  // namespace fedsim
