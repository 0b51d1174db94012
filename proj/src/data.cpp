#include "fedsim/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace fedsim {

std::vector<Eigen::Index> Dataset::class_counts() const {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(num_classes()), 0);
    for (int l : labels) {
        counts[static_cast<std::size_t>(l)] += 1;
    }
    return counts;
}

std::vector<std::vector<Eigen::Index>> Dataset::indices_by_class() const {
    std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(num_classes()));
    for (Eigen::Index i = 0; i < size(); ++i) {
        by_class[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
    }
    return by_class;
}

void Dataset::validate() const {
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
        throw DataError("label count does not match feature rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes()) {
            throw DataError("label out of range at row " + std::to_string(i));
        }
    }
    if (!features.allFinite()) {
        throw DataError("dataset contains non-finite feature values");
    }
}

Dataset subset(const Dataset& source, const std::vector<Eigen::Index>& rows) {
    Dataset out;
    out.class_names = source.class_names;
    out.feature_names = source.feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), source.features.cols());
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = source.features.row(rows[i]);
        out.labels[i] = source.labels[static_cast<std::size_t>(rows[i])];
    }
    return out;
}

void SyntheticSpec::validate() const {
    if (num_clients <= 0) {
        throw ConfigError("num_clients must be positive");
    }
    if (num_features <= 0) {
        throw ConfigError("num_features must be positive");
    }
    if (classes.empty()) {
        throw ConfigError("synthetic spec needs at least one class");
    }
    std::set<std::string> seen;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const ClassSpec& cs = classes[c];
        if (cs.name.empty() || !seen.insert(cs.name).second) {
            throw ConfigError("class " + std::to_string(c) + " has a missing or duplicate name");
        }
        if (cs.count <= 0) {
            throw ConfigError("class '" + cs.name + "' has sample_count <= 0");
        }
        if (cs.victims.empty()) {
            throw ConfigError("class '" + cs.name + "' has an empty victim list");
        }
        for (int v : cs.victims) {
            if (v < 0 || v >= num_clients) {
                throw ConfigError("class '" + cs.name + "' lists victim " + std::to_string(v) +
                                  " outside [0, " + std::to_string(num_clients) + ")");
            }
        }
        if (cs.num_centers < 1 || cs.num_centers > 3) {
            throw ConfigError("class '" + cs.name + "' must have 1-3 centers");
        }
        if (cs.noise < 0.0) {
            throw ConfigError("class '" + cs.name + "' has negative noise");
        }
        if (!cs.near_class.empty()) {
            bool found = false;
            for (std::size_t j = 0; j < c; ++j) {
                if (classes[j].name == cs.near_class) {
                    found = true;
                }
            }
            if (!found) {
                throw ConfigError("class '" + cs.name + "' anchors to '" + cs.near_class +
                                  "' which does not appear earlier in the class list");
            }
        }
        for (const Vector& ctr : cs.explicit_centers) {
            if (ctr.size() != num_features) {
                throw ConfigError("class '" + cs.name + "' has a center of wrong width");
            }
        }
    }
    // Benign (index 0) must be held by every client.
    if (static_cast<int>(classes.front().victims.size()) != num_clients) {
        throw ConfigError("benign class must list every client as a victim");
    }
}

std::pair<Dataset, VictimMap> generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();

    const int d = spec.num_features;

    // Resolve centers first, in class order, so anchored classes can reference
    // centers of earlier classes.
    std::vector<std::vector<Vector>> centers(spec.classes.size());
    std::map<std::string, std::size_t> index_of;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        index_of[spec.classes[c].name] = c;
    }
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const ClassSpec& cs = spec.classes[c];
        if (!cs.explicit_centers.empty()) {
            centers[c] = cs.explicit_centers;
            continue;
        }
        auto rng = make_rng(spec.seed, "centers", c);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int j = 0; j < cs.num_centers; ++j) {
            Vector ctr(d);
            if (cs.near_class.empty()) {
                for (int f = 0; f < d; ++f) {
                    ctr[f] = unit(rng);
                }
            } else {
                const auto& anchors = centers[index_of.at(cs.near_class)];
                std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
                Vector dir(d);
                for (int f = 0; f < d; ++f) {
                    dir[f] = gauss(rng);
                }
                dir.normalize();
                ctr = anchors[pick(rng)] + cs.near_distance * dir;
            }
            centers[c].push_back(std::move(ctr));
        }
    }

    Eigen::Index total = 0;
    for (const auto& cs : spec.classes) {
        total += cs.count;
    }

    Dataset out;
    out.features.resize(total, d);
    out.labels.resize(static_cast<std::size_t>(total));
    for (const auto& cs : spec.classes) {
        out.class_names.push_back(cs.name);
    }
    for (int f = 0; f < d; ++f) {
        out.feature_names.push_back("f" + std::to_string(f));
    }

    Eigen::Index row = 0;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const ClassSpec& cs = spec.classes[c];
        auto rng = make_rng(spec.seed, "samples", c);
        std::uniform_int_distribution<std::size_t> pick(0, centers[c].size() - 1);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (Eigen::Index i = 0; i < cs.count; ++i) {
            const Vector& ctr = centers[c][pick(rng)];
            for (int f = 0; f < d; ++f) {
                out.features(row, f) = ctr[f] + cs.noise * gauss(rng);
            }
            out.labels[static_cast<std::size_t>(row)] = static_cast<int>(c);
            ++row;
        }
    }

    VictimMap victims;
    for (const auto& cs : spec.classes) {
        victims.push_back(cs.victims);
    }
    return {std::move(out), std::move(victims)};
}

std::vector<Dataset> partition_by_victims(const Dataset& dataset, const VictimMap& victims,
                                          int num_clients, std::uint64_t seed) {
    if (num_clients <= 0) {
        throw ConfigError("num_clients must be positive");
    }
    if (victims.size() != static_cast<std::size_t>(dataset.num_classes())) {
        throw ConfigError("victim map does not cover every class");
    }

    auto by_class = dataset.indices_by_class();
    std::vector<std::vector<Eigen::Index>> rows_of(static_cast<std::size_t>(num_clients));

    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].empty()) {
            continue;
        }
        std::vector<int> v = victims[c];
        if (v.empty()) {
            throw ConfigError("class '" + dataset.class_names[c] + "' has an empty victim list");
        }
        std::sort(v.begin(), v.end());
        for (int client : v) {
            if (client < 0 || client >= num_clients) {
                throw ConfigError("class '" + dataset.class_names[c] + "' lists victim " +
                                  std::to_string(client) + " outside [0, " +
                                  std::to_string(num_clients) + ")");
            }
        }
        auto rng = make_rng(seed, "partition", c);
        std::vector<Eigen::Index> order = by_class[c];
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < order.size(); ++i) {
            rows_of[static_cast<std::size_t>(v[i % v.size()])].push_back(order[i]);
        }
    }

    std::vector<Dataset> clients;
    clients.reserve(static_cast<std::size_t>(num_clients));
    for (int i = 0; i < num_clients; ++i) {
        auto& rows = rows_of[static_cast<std::size_t>(i)];
        std::sort(rows.begin(), rows.end());  // stable row order within a client
        clients.push_back(subset(dataset, rows));
    }
    return clients;
}

ScalerParams fit_minmax(const Dataset& dataset) {
    if (dataset.size() == 0) {
        throw DataError("cannot fit scaler on an empty dataset");
    }
    ScalerParams p;
    p.min = dataset.features.colwise().minCoeff();
    p.max = dataset.features.colwise().maxCoeff();
    return p;
}

Dataset apply_minmax(const Dataset& dataset, const ScalerParams& scaler) {
    if (scaler.min.size() != dataset.features.cols()) {
        throw DataError("scaler width does not match dataset");
    }
    Dataset out = dataset;
    for (Eigen::Index f = 0; f < out.features.cols(); ++f) {
        double range = scaler.max[f] - scaler.min[f];
        if (range == 0.0) {
            out.features.col(f).setZero();
        } else {
            out.features.col(f) = (out.features.col(f).array() - scaler.min[f]) / range;
        }
    }
    if (!out.features.allFinite()) {
        throw DataError("non-finite feature values after scaling");
    }
    return out;
}

Dataset smote_oversample(const Dataset& dataset, const std::vector<double>& multipliers,
                         int k, std::uint64_t seed) {
    if (multipliers.size() != static_cast<std::size_t>(dataset.num_classes())) {
        throw ConfigError("need one SMOTE multiplier per class");
    }
    if (k < 1) {
        throw ConfigError("SMOTE k must be >= 1");
    }
    for (std::size_t c = 0; c < multipliers.size(); ++c) {
        if (multipliers[c] < 1.0) {
            throw ConfigError("SMOTE multiplier for class '" + dataset.class_names[c] +
                              "' must be >= 1");
        }
    }

    auto by_class = dataset.indices_by_class();

    // Count synthetics first so the output matrix can be sized once.
    Eigen::Index extra = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        Eigen::Index n = static_cast<Eigen::Index>(by_class[c].size());
        if (n == 0) {
            continue;
        }
        extra += std::llround(multipliers[c] * static_cast<double>(n)) - n;
    }

    Dataset out;
    out.class_names = dataset.class_names;
    out.feature_names = dataset.feature_names;
    out.features.resize(dataset.size() + extra, dataset.features.cols());
    out.features.topRows(dataset.size()) = dataset.features;
    out.labels = dataset.labels;
    out.labels.reserve(static_cast<std::size_t>(dataset.size() + extra));

    Eigen::Index row = dataset.size();
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& idx = by_class[c];
        Eigen::Index n = static_cast<Eigen::Index>(idx.size());
        if (n == 0) {
            continue;
        }
        Eigen::Index want = std::llround(multipliers[c] * static_cast<double>(n)) - n;
        if (want <= 0) {
            continue;
        }
        auto rng = make_rng(seed, "smote", c);

        if (n == 1) {
            warn("SMOTE: class '" + dataset.class_names[c] +
                 "' has a single sample; duplicating it instead of interpolating");
            for (Eigen::Index j = 0; j < want; ++j) {
                out.features.row(row) = dataset.features.row(idx[0]);
                out.labels.push_back(static_cast<int>(c));
                ++row;
            }
            continue;
        }

        // k nearest same-class neighbours by Euclidean distance, ties broken
        // by index so the result is order-stable.
        int k_eff = static_cast<int>(std::min<Eigen::Index>(k, n - 1));
        std::vector<std::vector<Eigen::Index>> neighbours(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<std::pair<double, Eigen::Index>> dist;
            dist.reserve(static_cast<std::size_t>(n - 1));
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                double d2 =
                    (dataset.features.row(idx[static_cast<std::size_t>(i)]) -
                     dataset.features.row(idx[static_cast<std::size_t>(j)]))
                        .squaredNorm();
                dist.emplace_back(d2, idx[static_cast<std::size_t>(j)]);
            }
            std::partial_sort(dist.begin(), dist.begin() + k_eff, dist.end());
            for (int t = 0; t < k_eff; ++t) {
                neighbours[static_cast<std::size_t>(i)].push_back(
                    dist[static_cast<std::size_t>(t)].second);
            }
        }

        std::uniform_int_distribution<Eigen::Index> pick_base(0, n - 1);
        std::uniform_int_distribution<int> pick_nn(0, k_eff - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (Eigen::Index j = 0; j < want; ++j) {
            Eigen::Index b = pick_base(rng);
            Eigen::Index nn = neighbours[static_cast<std::size_t>(b)]
                                        [static_cast<std::size_t>(pick_nn(rng))];
            double u = unit(rng);
            out.features.row(row) =
                dataset.features.row(idx[static_cast<std::size_t>(b)]) +
                u * (dataset.features.row(nn) -
                     dataset.features.row(idx[static_cast<std::size_t>(b)]));
            out.labels.push_back(static_cast<int>(c));
            ++row;
        }
    }
    return out;
}

Dataset collapse_to_binary(const Dataset& dataset) {
    Dataset out = dataset;
    for (auto& l : out.labels) {
        l = (l == 0) ? 0 : 1;
    }
    out.class_names = {dataset.class_names.empty() ? std::string("benign")
                                                   : dataset.class_names.front(),
                       "attack"};
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.push_back("");
    }
    return cells;
}

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }

    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("'" + path + "' is empty");
    }
    auto header = split_csv_line(line);
    for (auto& h : header) {
        h = strip(h);
    }

    auto column_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw DataError("column '" + name + "' missing from '" + path + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };

    std::vector<std::size_t> feature_cols;
    for (const auto& name : schema.feature_columns) {
        feature_cols.push_back(column_of(name));
    }
    std::size_t label_col = column_of(schema.label_column);

    std::map<std::string, int> label_of;
    for (std::size_t c = 0; c < schema.class_names.size(); ++c) {
        label_of[schema.class_names[c]] = static_cast<int>(c);
    }

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) {
            continue;
        }
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, found " +
                            std::to_string(cells.size()));
        }
        for (std::size_t f = 0; f < feature_cols.size(); ++f) {
            std::string cell = strip(cells[feature_cols[f]]);
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw DataError(path + ":" + std::to_string(line_no) + ": cannot parse '" +
                                cell + "' in column '" + schema.feature_columns[f] + "'");
            }
            values.push_back(v);
        }
        std::string label = strip(cells[label_col]);
        auto it = label_of.find(label);
        if (it == label_of.end()) {
            std::string known;
            for (const auto& name : schema.class_names) {
                known += (known.empty() ? "" : ", ") + name;
            }
            throw DataError(path + ":" + std::to_string(line_no) + ": unknown label '" + label +
                            "' (known classes: " + known + ")");
        }
        labels.push_back(it->second);
    }
    if (labels.empty()) {
        throw DataError("'" + path + "' has a header but no data rows");
    }

    Dataset out;
    out.class_names = schema.class_names;
    out.feature_names = schema.feature_columns;
    out.labels = std::move(labels);
    const Eigen::Index rows = static_cast<Eigen::Index>(out.labels.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(schema.feature_columns.size());
    out.features.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index f = 0; f < cols; ++f) {
            out.features(i, f) =
                values[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
                       static_cast<std::size_t>(f)];
        }
    }
    return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double train_fraction,
                                             std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw ConfigError("train_fraction must lie in (0, 1)");
    }
    auto by_class = dataset.indices_by_class();
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rng = make_rng(seed, "split", c);
        std::vector<Eigen::Index> order = by_class[c];
        std::shuffle(order.begin(), order.end(), rng);
        Eigen::Index n_train =
            std::llround(train_fraction * static_cast<double>(order.size()));
        for (std::size_t i = 0; i < order.size(); ++i) {
            (static_cast<Eigen::Index>(i) < n_train ? train_rows : test_rows)
                .push_back(order[i]);
        }
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {subset(dataset, train_rows), subset(dataset, test_rows)};
}

ServerDraw draw_disjoint_per_class(const Dataset& dataset, Eigen::Index first_per_class,
                                   Eigen::Index second_per_class, std::uint64_t seed) {
    auto by_class = dataset.indices_by_class();
    std::vector<Eigen::Index> first_rows, second_rows, rest_rows;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rng = make_rng(seed, "server_draw", c);
        std::vector<Eigen::Index> order = by_class[c];
        std::shuffle(order.begin(), order.end(), rng);
        Eigen::Index n = static_cast<Eigen::Index>(order.size());
        Eigen::Index a = std::min(first_per_class, n);
        Eigen::Index b = std::min(second_per_class, n - a);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto row = order[static_cast<std::size_t>(i)];
            if (i < a) {
                first_rows.push_back(row);
            } else if (i < a + b) {
                second_rows.push_back(row);
            } else {
                rest_rows.push_back(row);
            }
        }
    }
    std::sort(first_rows.begin(), first_rows.end());
    std::sort(second_rows.begin(), second_rows.end());
    std::sort(rest_rows.begin(), rest_rows.end());
    return {subset(dataset, first_rows), subset(dataset, second_rows), subset(dataset, rest_rows)};
}

}  // namespace fedsim
