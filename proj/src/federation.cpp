#include "fedsim/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace fedsim {

std::string algorithm_name(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::FedAvg: return "fedavg";
        case Algorithm::FedProx: return "fedprox";
        case Algorithm::Scaffold: return "scaffold";
        case Algorithm::FedMade: return "fedmade";
    }
    throw ConfigError("unknown algorithm enum value");
}

Algorithm parse_algorithm(const std::string& name) {
    if (name == "fedavg") return Algorithm::FedAvg;
    if (name == "fedprox") return Algorithm::FedProx;
    if (name == "scaffold") return Algorithm::Scaffold;
    if (name == "fedmade") return Algorithm::FedMade;
    throw ConfigError("unknown algorithm '" + name +
                      "' (expected fedavg, fedprox, scaffold or fedmade)");
}

double SmoteConfig::multiplier_for(const std::string& class_name) const {
    auto it = per_class.find(class_name);
    return it == per_class.end() ? default_multiplier : it->second;
}

int DataConfig::num_clients() const {
    return source == Source::Synthetic ? synthetic.num_clients : csv_num_clients;
}

void DataConfig::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("data.train_fraction must lie in (0, 1)");
    }
    if (validation_per_class < 1) {
        throw ConfigError("data.validation_per_class must be >= 1");
    }
    if (smote.k < 1) {
        throw ConfigError("data.smote.k must be >= 1");
    }
    if (smote.default_multiplier < 1.0) {
        throw ConfigError("data.smote.default_multiplier must be >= 1");
    }
    for (const auto& [name, multiplier] : smote.per_class) {
        if (multiplier < 1.0) {
            throw ConfigError("data.smote.per_class['" + name + "'] must be >= 1");
        }
    }
    if (source == Source::Synthetic) {
        synthetic.validate();
        return;
    }
    if (csv_path.empty()) {
        throw ConfigError("data.csv_path is required for csv sources");
    }
    if (csv_num_clients < 1) {
        throw ConfigError("data.csv_num_clients must be >= 1");
    }
    if (csv_schema.feature_columns.empty()) {
        throw ConfigError("data.csv_schema.feature_columns must not be empty");
    }
    if (csv_schema.label_column.empty()) {
        throw ConfigError("data.csv_schema.label_column is required");
    }
    if (csv_schema.class_names.size() < 2) {
        throw ConfigError("data.csv_schema.class_names needs at least two classes");
    }
    if (csv_victims.size() != csv_schema.class_names.size()) {
        throw ConfigError("data.csv_victims must name victim clients for every class");
    }
    std::vector<bool> covered(static_cast<std::size_t>(csv_num_clients), false);
    for (std::size_t c = 0; c < csv_victims.size(); ++c) {
        if (csv_victims[c].empty()) {
            throw ConfigError("data.csv_victims for class '" + csv_schema.class_names[c] +
                              "' must not be empty");
        }
        for (int id : csv_victims[c]) {
            if (id < 0 || id >= csv_num_clients) {
                throw ConfigError("data.csv_victims for class '" + csv_schema.class_names[c] +
                                  "' names client " + std::to_string(id) + " outside [0, " +
                                  std::to_string(csv_num_clients) + ")");
            }
            covered[static_cast<std::size_t>(id)] = true;
        }
    }
    for (int id = 0; id < csv_num_clients; ++id) {
        if (!covered[static_cast<std::size_t>(id)]) {
            throw ConfigError("client " + std::to_string(id) +
                              " appears in no data.csv_victims list and would hold no data");
        }
    }
}

void ExperimentConfig::validate() const {
    if (schema_version != 1) {
        throw ConfigError("schema_version must be 1");
    }
    if (name.empty()) {
        throw ConfigError("name must not be empty");
    }
    if (rounds < 1) {
        throw ConfigError("rounds must be >= 1");
    }
    if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) {
        throw ConfigError("sampling_rate must lie in (0, 1]");
    }
    if (local_epochs < 1) {
        throw ConfigError("local_epochs must be >= 1");
    }
    if (!std::isfinite(client_lr) || client_lr < 0.0) {
        throw ConfigError("client_lr must be finite and >= 0");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1");
    }
    if (!std::isfinite(fedprox_mu) || fedprox_mu < 0.0) {
        throw ConfigError("fedprox_mu must be finite and >= 0");
    }
    for (int width : hidden) {
        if (width < 1) {
            throw ConfigError("hidden layer widths must be >= 1");
        }
    }
    if (!std::isfinite(fedmade.eps)) {
        throw ConfigError("fedmade.eps must be finite");
    }
    if (fedmade.min_pts < 1) {
        throw ConfigError("fedmade.min_pts must be >= 1");
    }
    if (fedmade.solver_iters < 1) {
        throw ConfigError("fedmade.solver_iters must be >= 1");
    }
    if (!std::isfinite(fedmade.solver_lr) || fedmade.solver_lr <= 0.0) {
        throw ConfigError("fedmade.solver_lr must be > 0");
    }
    if (fedmade.aux_per_class < 1) {
        throw ConfigError("fedmade.aux_per_class must be >= 1");
    }
    if (output_dir.empty()) {
        throw ConfigError("output_dir must not be empty");
    }
    adversary.validate();
    data.validate();
}

PreparedExperiment prepare_experiment(const ExperimentConfig& config) {
    config.validate();
    const DataConfig& dc = config.data;

    Dataset full;
    VictimMap victims;
    if (dc.source == DataConfig::Source::Synthetic) {
        SyntheticSpec spec = dc.synthetic;
        spec.seed = config.seed;
        auto generated = generate_synthetic(spec);
        full = std::move(generated.first);
        victims = std::move(generated.second);
    } else {
        full = load_csv(dc.csv_path, dc.csv_schema);
        victims = dc.csv_victims;
    }
    full.validate();

    auto [train, test] = stratified_split(full, dc.train_fraction, config.seed);

    ScalerParams scaler = fit_minmax(train);
    train = apply_minmax(train, scaler);
    test = apply_minmax(test, scaler);

    ServerDraw draw = draw_disjoint_per_class(train, config.fedmade.aux_per_class,
                                              dc.validation_per_class, config.seed);

    if (config.algorithm == Algorithm::FedMade) {
        auto counts = draw.first.class_counts();
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0) {
                throw DataError("auxiliary set holds no samples of class '" +
                                train.class_names[c] +
                                "'; lower fedmade.aux_per_class or add data");
            }
        }
    }
    if (draw.second.size() == 0) {
        throw DataError("validation set is empty; add data or lower server draw sizes");
    }

    const int n = dc.num_clients();
    std::vector<Dataset> parts = partition_by_victims(draw.rest, victims, n, config.seed);
    for (int id = 0; id < n; ++id) {
        if (parts[static_cast<std::size_t>(id)].size() == 0) {
            throw DataError("client " + std::to_string(id) +
                            " received no training data; the server draws may have consumed "
                            "its classes");
        }
    }

    if (dc.smote.enabled) {
        std::vector<double> multipliers;
        multipliers.reserve(train.class_names.size());
        for (const auto& name : train.class_names) {
            multipliers.push_back(dc.smote.multiplier_for(name));
        }
        for (int id = 0; id < n; ++id) {
            auto& part = parts[static_cast<std::size_t>(id)];
            part = smote_oversample(part, multipliers, dc.smote.k,
                                    derive_seed(config.seed, "smote", static_cast<std::uint64_t>(id)));
        }
    }

    if (dc.binary) {
        for (auto& part : parts) {
            part = collapse_to_binary(part);
        }
        draw.first = collapse_to_binary(draw.first);
        draw.second = collapse_to_binary(draw.second);
        test = collapse_to_binary(test);
    }

    PreparedExperiment prep;
    if (config.adversary.kind != AdversaryKind::None) {
        std::vector<int> ids(static_cast<std::size_t>(n));
        std::iota(ids.begin(), ids.end(), 0);
        auto rng = make_rng(config.seed, "compromised");
        prep.compromised = select_compromised(ids, config.adversary.compromised_fraction, rng);
        if (config.adversary.kind == AdversaryKind::DataPoison) {
            for (int id : prep.compromised) {
                auto& part = parts[static_cast<std::size_t>(id)];
                part = flip_labels(part, *config.adversary.direction);
            }
        }
    }

    const int num_classes = dc.binary ? 2 : full.num_classes();
    prep.model_specs = dense_stack(full.num_features(), config.hidden, num_classes);
    prep.aux = std::move(draw.first);
    prep.validation = std::move(draw.second);
    prep.test = std::move(test);

    const Eigen::Index params = param_count(prep.model_specs);
    prep.clients.reserve(static_cast<std::size_t>(n));
    for (int id = 0; id < n; ++id) {
        ClientState cs;
        cs.client_id = id;
        cs.dataset = std::move(parts[static_cast<std::size_t>(id)]);
        if (config.algorithm == Algorithm::Scaffold) {
            cs.variate = Vector::Zero(params);
        }
        if (std::binary_search(prep.compromised.begin(), prep.compromised.end(), id)) {
            cs.role = config.adversary.kind;
        }
        prep.clients.push_back(std::move(cs));
    }
    return prep;
}

std::vector<int> sample_clients(const std::vector<int>& all_ids, double gamma,
                                std::mt19937_64& rng) {
    if (all_ids.empty()) {
        throw ConfigError("sample_clients needs at least one client");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ConfigError("sampling rate must lie in (0, 1]");
    }
    const auto n = all_ids.size();
    // floor, with a guard so products like 0.3 * 10 land on the integer
    auto want = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n) + 1e-9));
    want = std::clamp<std::size_t>(want, 1, n);
    std::vector<int> ids = all_ids;
    if (want < n) {
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(want);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

LocalUpdateResult local_update(const ModelParams& global, ClientState& client,
                               const ExperimentConfig& config, int round,
                               const Vector* server_variate) {
    if (client.dataset.size() == 0) {
        throw DataError("client " + std::to_string(client.client_id) + " has no training data");
    }

    TrainOptions options;
    options.epochs = config.local_epochs;
    options.batch_size = config.batch_size;
    options.shuffle_each_epoch = config.shuffle_each_epoch;
    options.optimizer = OptimizerKind::Adam;
    options.learning_rate = config.client_lr;
    options.precision = config.precision;

    LossConfig loss;
    ModelParams anchor;
    if (config.algorithm == Algorithm::FedProx) {
        loss.proximal_mu = config.fedprox_mu;
        anchor = global;
    } else if (config.algorithm == Algorithm::Scaffold) {
        if (server_variate == nullptr || !client.variate) {
            throw AggregationError("scaffold control variates missing for client " +
                                   std::to_string(client.client_id));
        }
        loss.scaffold_correction = *server_variate - *client.variate;
    }

    auto rng = make_rng(config.seed, "train", static_cast<std::uint64_t>(round),
                        static_cast<std::uint64_t>(client.client_id));
    TrainRunResult run = train_epochs(global, client.dataset.features, client.dataset.labels,
                                      options, loss, anchor, rng);

    LocalUpdateResult out;
    out.model = std::move(run.model);
    out.steps = run.steps;
    if (config.algorithm == Algorithm::Scaffold) {
        const double denom = static_cast<double>(run.steps) * config.client_lr;
        Vector updated = *client.variate - *server_variate;
        if (denom > 0.0) {
            updated += (global.flat - out.model.flat) / denom;
        }
        out.variate_delta = updated - *client.variate;
        client.variate = std::move(updated);
    }
    return out;
}

std::vector<int> predict(const ModelParams& model, const Matrix& features) {
    const Matrix probs = forward(model, features);
    std::vector<int> labels(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        int best = 0;
        for (Eigen::Index c = 1; c < probs.cols(); ++c) {
            if (probs(r, c) > probs(r, best)) {
                best = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(r)] = best;
    }
    return labels;
}

EvalResult evaluate(const ModelParams& model, const Dataset& dataset) {
    if (dataset.size() == 0) {
        throw DataError("evaluate needs a non-empty dataset");
    }
    EvalResult out;
    const auto predictions = predict(model, dataset.features);
    out.confusion = confusion(predictions, dataset.labels, dataset.num_classes());
    const int num_classes = dataset.num_classes();
    out.metrics = summarize(out.confusion, num_classes == 2 ? 1 : 0);
    if (num_classes != 2) {
        // Multiclass headline numbers are macro averages over one-vs-rest.
        double precision = 0.0, recall = 0.0, f1 = 0.0;
        bool division_by_zero = false;
        for (int c = 0; c < num_classes; ++c) {
            MetricsSummary s = summarize(out.confusion, c);
            precision += s.precision;
            recall += s.recall;
            f1 += s.f1;
            division_by_zero = division_by_zero || s.division_by_zero;
        }
        out.metrics.precision = precision / num_classes;
        out.metrics.recall = recall / num_classes;
        out.metrics.f1 = f1 / num_classes;
        out.metrics.division_by_zero = division_by_zero;
        out.metrics.positive_class = -1;
    }
    return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config, Clock* clock,
                                const RoundCallback& on_round) {
    config.validate();
    SteadyClock steady;
    Clock* clk = clock != nullptr ? clock : &steady;

    ExperimentReport report;
    report.config = config;

    const double experiment_start = clk->now_seconds();

    PreparedExperiment prep = prepare_experiment(config);
    report.class_names = prep.test.class_names;

    ModelParams global = init_model(prep.model_specs, derive_seed(config.seed, "init"));
    Vector server_variate;
    if (config.algorithm == Algorithm::Scaffold) {
        server_variate = Vector::Zero(global.param_count());
    }

    std::vector<int> all_ids(prep.clients.size());
    std::iota(all_ids.begin(), all_ids.end(), 0);

    // Pool for per-round aux redraws: everything the server holds back.
    Dataset server_pool;
    if (config.algorithm == Algorithm::FedMade && config.fedmade.resample_aux) {
        server_pool = prep.aux;
        server_pool.features.conservativeResize(
            prep.aux.size() + prep.validation.size(), Eigen::NoChange);
        server_pool.features.bottomRows(prep.validation.size()) = prep.validation.features;
        server_pool.labels.insert(server_pool.labels.end(), prep.validation.labels.begin(),
                                  prep.validation.labels.end());
    }

    double best_accuracy = -1.0;
    for (int round = 1; round <= config.rounds; ++round) {
        RoundRecord rec;
        rec.round = round;
        try {
            const double round_start = clk->now_seconds();
            auto rng = make_rng(config.seed, "sample", static_cast<std::uint64_t>(round));
            const std::vector<int> sampled =
                sample_clients(all_ids, config.sampling_rate, rng);

            std::vector<ClientModel> uploads;   // fedmade path
            std::vector<ModelParams> models;    // everyone else, ascending client id
            std::vector<Eigen::Index> sizes;
            std::vector<Vector> deltas;
            for (int id : sampled) {
                ClientState& cs = prep.clients[static_cast<std::size_t>(id)];
                try {
                    LocalUpdateResult res =
                        local_update(global, cs, config, round,
                                     config.algorithm == Algorithm::Scaffold ? &server_variate
                                                                             : nullptr);
                    ModelParams upload = std::move(res.model);
                    if (cs.role == AdversaryKind::ModelPoison) {
                        upload = scale_model(upload, config.adversary.lambda_scale);
                    }
                    rec.participants.push_back(id);
                    sizes.push_back(cs.dataset.size());
                    if (res.variate_delta) {
                        deltas.push_back(std::move(*res.variate_delta));
                    }
                    if (config.algorithm == Algorithm::FedMade) {
                        uploads.push_back({id, std::move(upload)});
                    } else {
                        models.push_back(std::move(upload));
                    }
                } catch (const NumericalError& e) {
                    rec.failed.push_back(id);
                    warn("round " + std::to_string(round) + ": client " + std::to_string(id) +
                         " isolated: " + e.what());
                }
            }
            if (rec.participants.empty()) {
                throw AggregationError("round " + std::to_string(round) +
                                       ": every sampled client failed");
            }

            switch (config.algorithm) {
                case Algorithm::FedAvg:
                case Algorithm::FedProx:
                    global = fedavg_aggregate(models, sizes);
                    break;
                case Algorithm::Scaffold: {
                    ScaffoldServerResult res = scaffold_server_step(
                        models, deltas, server_variate, static_cast<int>(prep.clients.size()));
                    global = std::move(res.model);
                    server_variate = std::move(res.server_variate);
                    break;
                }
                case Algorithm::FedMade: {
                    FedMadeParams params;
                    params.eps = config.fedmade.eps;
                    params.min_pts = config.fedmade.min_pts;
                    params.solver_iters = config.fedmade.solver_iters;
                    params.solver_lr = config.fedmade.solver_lr;
                    const Dataset* round_aux = &prep.aux;
                    Dataset redrawn;
                    if (config.fedmade.resample_aux) {
                        redrawn = draw_disjoint_per_class(
                                      server_pool, config.fedmade.aux_per_class, 0,
                                      derive_seed(config.seed, "aux",
                                                  static_cast<std::uint64_t>(round)))
                                      .first;
                        round_aux = &redrawn;
                    }
                    auto result = fedmade_aggregate(uploads, *round_aux, params);
                    global = std::move(result.first);
                    const FedMadeDiagnostics& diag = result.second;
                    FedMadeRoundInfo info;
                    info.num_clusters = diag.num_clusters;
                    info.alpha = diag.alpha;
                    info.beta = diag.beta;
                    info.cluster_of = diag.cluster_of;
                    info.residual = diag.residual;
                    info.fallback_uniform = diag.fallback_uniform;
                    rec.fedmade = std::move(info);
                    break;
                }
            }
            rec.duration_seconds = clk->now_seconds() - round_start;

            const EvalResult val = evaluate(global, prep.validation);
            rec.val_accuracy = val.metrics.accuracy;
            rec.val_per_class_accuracy = val.metrics.per_class_accuracy;
            rec.val_precision = val.metrics.precision;
            rec.val_recall = val.metrics.recall;
            rec.val_f1 = val.metrics.f1;
        } catch (const std::exception& e) {
            report.aborted = true;
            report.abort_reason = e.what();
            warn("experiment aborted in round " + std::to_string(round) + ": " + e.what());
            break;
        }

        if (rec.val_accuracy > best_accuracy) {
            best_accuracy = rec.val_accuracy;
            report.best_round = round;
            report.best_val_accuracy = rec.val_accuracy;
            report.best_model = global;
        }
        report.rounds.push_back(std::move(rec));
        if (on_round) {
            on_round(report.rounds.back());
        }
    }

    if (report.best_round > 0) {
        report.test = evaluate(report.best_model, prep.test);
    }
    report.total_wall_seconds = clk->now_seconds() - experiment_start;
    return report;
}

}  // namespace fedsim
