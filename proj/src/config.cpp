#include "fedsim/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fedsim {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + " " + what);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        fail(path.empty() ? "top level" : path, "must be an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            fail(join(path, it.key()), "is not a recognised key");
        }
    }
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

bool get_bool(const json& j, const char* key, const std::string& path, bool fallback) {
    const json* v = find(j, key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) fail(join(path, key), "must be a boolean");
    return v->get<bool>();
}

int get_int(const json& j, const char* key, const std::string& path, int fallback) {
    const json* v = find(j, key);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer()) fail(join(path, key), "must be an integer");
    return v->get<int>();
}

long long get_count(const json& j, const char* key, const std::string& path) {
    const json* v = find(j, key);
    if (v == nullptr) fail(join(path, key), "is required");
    if (!v->is_number_integer()) fail(join(path, key), "must be an integer");
    return v->get<long long>();
}

std::uint64_t get_u64(const json& j, const char* key, const std::string& path,
                      std::uint64_t fallback) {
    const json* v = find(j, key);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
        fail(join(path, key), "must be an integer");
    }
    return v->get<std::uint64_t>();
}

double get_double(const json& j, const char* key, const std::string& path, double fallback) {
    const json* v = find(j, key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) fail(join(path, key), "must be a number");
    return v->get<double>();
}

std::string get_string(const json& j, const char* key, const std::string& path,
                       const std::string& fallback) {
    const json* v = find(j, key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) fail(join(path, key), "must be a string");
    return v->get<std::string>();
}

std::vector<int> get_int_array(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "must be an array of integers");
    std::vector<int> out;
    out.reserve(v.size());
    for (const auto& item : v) {
        if (!item.is_number_integer()) fail(path, "must hold only integers");
        out.push_back(item.get<int>());
    }
    return out;
}

std::vector<std::string> get_string_array(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "must be an array of strings");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& item : v) {
        if (!item.is_string()) fail(path, "must hold only strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

ClassSpec parse_class(const json& j, const std::string& path) {
    check_keys(j, path, {"name", "count", "victims", "num_centers", "centers", "noise",
                         "near_class", "near_distance"});
    ClassSpec spec;
    spec.name = get_string(j, "name", path, "");
    if (spec.name.empty()) fail(join(path, "name"), "is required");
    spec.count = get_count(j, "count", path);
    const json* victims = find(j, "victims");
    if (victims == nullptr) fail(join(path, "victims"), "is required");
    spec.victims = get_int_array(*victims, join(path, "victims"));
    spec.num_centers = get_int(j, "num_centers", path, 1);
    if (const json* centers = find(j, "centers")) {
        if (!centers->is_array()) fail(join(path, "centers"), "must be an array of arrays");
        for (std::size_t i = 0; i < centers->size(); ++i) {
            const json& row = (*centers)[i];
            if (!row.is_array()) fail(join(path, "centers"), "must be an array of arrays");
            Vector center(static_cast<Eigen::Index>(row.size()));
            for (std::size_t d = 0; d < row.size(); ++d) {
                if (!row[d].is_number()) fail(join(path, "centers"), "must hold only numbers");
                center[static_cast<Eigen::Index>(d)] = row[d].get<double>();
            }
            spec.explicit_centers.push_back(std::move(center));
        }
    }
    spec.noise = get_double(j, "noise", path, spec.noise);
    spec.near_class = get_string(j, "near_class", path, "");
    spec.near_distance = get_double(j, "near_distance", path, 0.0);
    return spec;
}

SyntheticSpec parse_synthetic(const json& j, const std::string& path) {
    check_keys(j, path, {"num_features", "num_clients", "classes"});
    SyntheticSpec spec;
    spec.num_features = get_int(j, "num_features", path, 0);
    spec.num_clients = get_int(j, "num_clients", path, 0);
    const json* classes = find(j, "classes");
    if (classes == nullptr || !classes->is_array()) {
        fail(join(path, "classes"), "must be an array of class objects");
    }
    for (std::size_t i = 0; i < classes->size(); ++i) {
        spec.classes.push_back(
            parse_class((*classes)[i], join(path, "classes[" + std::to_string(i) + "]")));
    }
    return spec;
}

SmoteConfig parse_smote(const json& j, const std::string& path) {
    check_keys(j, path, {"enabled", "k", "default_multiplier", "per_class"});
    SmoteConfig smote;
    smote.enabled = get_bool(j, "enabled", path, smote.enabled);
    smote.k = get_int(j, "k", path, smote.k);
    smote.default_multiplier = get_double(j, "default_multiplier", path, smote.default_multiplier);
    if (const json* per = find(j, "per_class")) {
        if (!per->is_object()) fail(join(path, "per_class"), "must map class names to numbers");
        for (auto it = per->begin(); it != per->end(); ++it) {
            if (!it.value().is_number()) {
                fail(join(path, "per_class") + "." + it.key(), "must be a number");
            }
            smote.per_class[it.key()] = it.value().get<double>();
        }
    }
    return smote;
}

DataConfig parse_data(const json& j, const std::string& path) {
    check_keys(j, path, {"source", "binary", "train_fraction", "validation_per_class",
                         "synthetic", "csv", "smote"});
    DataConfig data;
    const json* synthetic = find(j, "synthetic");
    const json* csv = find(j, "csv");

    std::string source = get_string(j, "source", path, "");
    if (source.empty()) {
        if (synthetic != nullptr && csv == nullptr) {
            source = "synthetic";
        } else if (csv != nullptr && synthetic == nullptr) {
            source = "csv";
        } else {
            fail(join(path, "source"),
                 "is required unless exactly one of 'synthetic' or 'csv' is present");
        }
    }
    if (source == "synthetic") {
        data.source = DataConfig::Source::Synthetic;
        if (synthetic == nullptr) fail(join(path, "synthetic"), "is required");
        data.synthetic = parse_synthetic(*synthetic, join(path, "synthetic"));
    } else if (source == "csv") {
        data.source = DataConfig::Source::Csv;
        if (csv == nullptr) fail(join(path, "csv"), "is required");
        const std::string csv_path = join(path, "csv");
        check_keys(*csv, csv_path, {"path", "label_column", "feature_columns", "class_names",
                                    "victims", "num_clients"});
        data.csv_path = get_string(*csv, "path", csv_path, "");
        data.csv_schema.label_column = get_string(*csv, "label_column", csv_path, "");
        if (const json* cols = find(*csv, "feature_columns")) {
            data.csv_schema.feature_columns =
                get_string_array(*cols, join(csv_path, "feature_columns"));
        }
        if (const json* names = find(*csv, "class_names")) {
            data.csv_schema.class_names = get_string_array(*names, join(csv_path, "class_names"));
        }
        if (const json* victims = find(*csv, "victims")) {
            if (!victims->is_array()) {
                fail(join(csv_path, "victims"), "must be an array of integer arrays");
            }
            for (std::size_t c = 0; c < victims->size(); ++c) {
                data.csv_victims.push_back(get_int_array(
                    (*victims)[c], join(csv_path, "victims[" + std::to_string(c) + "]")));
            }
        }
        data.csv_num_clients = get_int(*csv, "num_clients", csv_path, 0);
    } else {
        fail(join(path, "source"), "must be 'synthetic' or 'csv'");
    }

    data.binary = get_bool(j, "binary", path, data.binary);
    data.train_fraction = get_double(j, "train_fraction", path, data.train_fraction);
    data.validation_per_class = get_int(j, "validation_per_class", path, data.validation_per_class);
    if (const json* smote = find(j, "smote")) {
        data.smote = parse_smote(*smote, join(path, "smote"));
    }
    return data;
}

FedMadeConfig parse_fedmade(const json& j, const std::string& path) {
    check_keys(j, path,
               {"eps", "min_pts", "solver_iters", "solver_lr", "aux_per_class",
                "resample_aux"});
    FedMadeConfig fm;
    fm.eps = get_double(j, "eps", path, fm.eps);
    fm.min_pts = get_int(j, "min_pts", path, fm.min_pts);
    fm.solver_iters = get_int(j, "solver_iters", path, fm.solver_iters);
    fm.solver_lr = get_double(j, "solver_lr", path, fm.solver_lr);
    fm.aux_per_class = get_int(j, "aux_per_class", path, fm.aux_per_class);
    fm.resample_aux = get_bool(j, "resample_aux", path, fm.resample_aux);
    return fm;
}

AdversaryConfig parse_adversary(const json& j, const std::string& path) {
    check_keys(j, path, {"kind", "direction", "compromised_fraction", "lambda_scale"});
    AdversaryConfig adv;
    const std::string kind = get_string(j, "kind", path, "none");
    if (kind == "none") {
        adv.kind = AdversaryKind::None;
    } else if (kind == "data_poison") {
        adv.kind = AdversaryKind::DataPoison;
    } else if (kind == "model_poison") {
        adv.kind = AdversaryKind::ModelPoison;
    } else {
        fail(join(path, "kind"), "must be 'none', 'data_poison' or 'model_poison'");
    }
    if (const json* dir = find(j, "direction")) {
        if (!dir->is_string()) fail(join(path, "direction"), "must be a string");
        const std::string direction = dir->get<std::string>();
        if (direction == "attack_to_benign") {
            adv.direction = FlipDirection::AttackToBenign;
        } else if (direction == "benign_to_attack") {
            adv.direction = FlipDirection::BenignToAttack;
        } else {
            fail(join(path, "direction"), "must be 'attack_to_benign' or 'benign_to_attack'");
        }
    }
    adv.compromised_fraction = get_double(j, "compromised_fraction", path, 0.0);
    adv.lambda_scale = get_double(j, "lambda_scale", path, 1.0);
    return adv;
}

json class_to_json(const ClassSpec& spec) {
    json j;
    j["name"] = spec.name;
    j["count"] = static_cast<long long>(spec.count);
    j["victims"] = spec.victims;
    j["num_centers"] = spec.num_centers;
    if (!spec.explicit_centers.empty()) {
        json centers = json::array();
        for (const auto& center : spec.explicit_centers) {
            centers.push_back(std::vector<double>(center.data(), center.data() + center.size()));
        }
        j["centers"] = std::move(centers);
    }
    j["noise"] = spec.noise;
    if (!spec.near_class.empty()) {
        j["near_class"] = spec.near_class;
        j["near_distance"] = spec.near_distance;
    }
    return j;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "", {"schema_version", "name", "algorithm", "rounds", "sampling_rate",
                       "local_epochs", "client_lr", "batch_size", "shuffle_each_epoch",
                       "precision", "fedprox_mu", "hidden", "data", "fedmade", "adversary",
                       "seed", "output_dir"});

    ExperimentConfig config;
    config.schema_version = get_int(j, "schema_version", "", 1);
    config.name = get_string(j, "name", "", config.name);
    const std::string algorithm = get_string(j, "algorithm", "", "");
    if (algorithm.empty()) fail("algorithm", "is required");
    config.algorithm = parse_algorithm(algorithm);
    config.rounds = get_int(j, "rounds", "", config.rounds);
    config.sampling_rate = get_double(j, "sampling_rate", "", config.sampling_rate);
    config.local_epochs = get_int(j, "local_epochs", "", config.local_epochs);
    config.client_lr = get_double(j, "client_lr", "", config.client_lr);
    config.batch_size = get_int(j, "batch_size", "", config.batch_size);
    config.shuffle_each_epoch = get_bool(j, "shuffle_each_epoch", "", config.shuffle_each_epoch);
    const std::string precision = get_string(j, "precision", "", "f64");
    if (precision == "f64") {
        config.precision = TrainPrecision::F64;
    } else if (precision == "f32") {
        config.precision = TrainPrecision::F32;
    } else {
        fail("precision", "must be 'f64' or 'f32'");
    }
    config.fedprox_mu = get_double(j, "fedprox_mu", "", config.fedprox_mu);
    if (const json* hidden = find(j, "hidden")) {
        config.hidden = get_int_array(*hidden, "hidden");
    }
    const json* data = find(j, "data");
    if (data == nullptr) fail("data", "is required");
    config.data = parse_data(*data, "data");
    if (const json* fm = find(j, "fedmade")) {
        config.fedmade = parse_fedmade(*fm, "fedmade");
    }
    if (const json* adv = find(j, "adversary")) {
        config.adversary = parse_adversary(*adv, "adversary");
    }
    config.seed = get_u64(j, "seed", "", config.seed);
    config.output_dir = get_string(j, "output_dir", "", config.output_dir);

    config.validate();
    return config;
}

std::string config_to_json(const ExperimentConfig& config) {
    json j;
    j["schema_version"] = config.schema_version;
    j["name"] = config.name;
    j["algorithm"] = algorithm_name(config.algorithm);
    j["rounds"] = config.rounds;
    j["sampling_rate"] = config.sampling_rate;
    j["local_epochs"] = config.local_epochs;
    j["client_lr"] = config.client_lr;
    j["batch_size"] = config.batch_size;
    j["shuffle_each_epoch"] = config.shuffle_each_epoch;
    j["precision"] = config.precision == TrainPrecision::F64 ? "f64" : "f32";
    j["fedprox_mu"] = config.fedprox_mu;
    j["hidden"] = config.hidden;

    json data;
    data["source"] = config.data.source == DataConfig::Source::Synthetic ? "synthetic" : "csv";
    if (config.data.source == DataConfig::Source::Synthetic) {
        json synthetic;
        synthetic["num_features"] = config.data.synthetic.num_features;
        synthetic["num_clients"] = config.data.synthetic.num_clients;
        json classes = json::array();
        for (const auto& spec : config.data.synthetic.classes) {
            classes.push_back(class_to_json(spec));
        }
        synthetic["classes"] = std::move(classes);
        data["synthetic"] = std::move(synthetic);
    } else {
        json csv;
        csv["path"] = config.data.csv_path;
        csv["label_column"] = config.data.csv_schema.label_column;
        csv["feature_columns"] = config.data.csv_schema.feature_columns;
        csv["class_names"] = config.data.csv_schema.class_names;
        csv["victims"] = config.data.csv_victims;
        csv["num_clients"] = config.data.csv_num_clients;
        data["csv"] = std::move(csv);
    }
    data["binary"] = config.data.binary;
    data["train_fraction"] = config.data.train_fraction;
    data["validation_per_class"] = config.data.validation_per_class;
    json smote;
    smote["enabled"] = config.data.smote.enabled;
    smote["k"] = config.data.smote.k;
    smote["default_multiplier"] = config.data.smote.default_multiplier;
    json per_class = json::object();
    for (const auto& [name, multiplier] : config.data.smote.per_class) {
        per_class[name] = multiplier;
    }
    smote["per_class"] = std::move(per_class);
    data["smote"] = std::move(smote);
    j["data"] = std::move(data);

    json fm;
    fm["eps"] = config.fedmade.eps;
    fm["min_pts"] = config.fedmade.min_pts;
    fm["solver_iters"] = config.fedmade.solver_iters;
    fm["solver_lr"] = config.fedmade.solver_lr;
    fm["aux_per_class"] = config.fedmade.aux_per_class;
    fm["resample_aux"] = config.fedmade.resample_aux;
    j["fedmade"] = std::move(fm);

    json adv;
    switch (config.adversary.kind) {
        case AdversaryKind::None: adv["kind"] = "none"; break;
        case AdversaryKind::DataPoison: adv["kind"] = "data_poison"; break;
        case AdversaryKind::ModelPoison: adv["kind"] = "model_poison"; break;
    }
    if (config.adversary.direction) {
        adv["direction"] = *config.adversary.direction == FlipDirection::AttackToBenign
                               ? "attack_to_benign"
                               : "benign_to_attack";
    }
    adv["compromised_fraction"] = config.adversary.compromised_fraction;
    adv["lambda_scale"] = config.adversary.lambda_scale;
    j["adversary"] = std::move(adv);

    j["seed"] = config.seed;
    j["output_dir"] = config.output_dir;
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return config_from_json(buffer.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void save_config(const ExperimentConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write config file: " + path);
    }
    out << config_to_json(config);
    if (!out) {
        throw IoError("failed while writing config file: " + path);
    }
}

}  // namespace fedsim
