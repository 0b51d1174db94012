#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/common.hpp"
#include "fedsim/nn.hpp"

namespace fedsim {

// class_names index 0 is the benign class; attacks and the binary collapse
// rely on that convention.
struct Dataset {
    Matrix features;  // rows = samples
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::vector<std::string> feature_names;

    Eigen::Index size() const { return features.rows(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }
    int num_features() const { return static_cast<int>(features.cols()); }

    std::vector<Eigen::Index> class_counts() const;
    std::vector<std::vector<Eigen::Index>> indices_by_class() const;

    void validate() const;  // label range + finite features
};

// Rows of `source` selected by `rows`, preserving order.
Dataset subset(const Dataset& source, const std::vector<Eigen::Index>& rows);

struct ClassSpec {
    std::string name;
    Eigen::Index count = 0;
    std::vector<int> victims;
    int num_centers = 1;
    std::vector<Vector> explicit_centers;  // overrides generated centers
    double noise = 0.05;
    // Optional anchored placement: centers land at `near_distance` from a
    // (seeded) random center of `near_class`, which must appear earlier in
    // the class list. This is how confusable classes are built.
    std::string near_class;
    double near_distance = 0.0;
};

struct SyntheticSpec {
    int num_features = 0;
    int num_clients = 0;
    std::vector<ClassSpec> classes;
    std::uint64_t seed = 0;

    int num_classes() const { return static_cast<int>(classes.size()); }
    void validate() const;
};

using VictimMap = std::vector<std::vector<int>>;  // class index -> client ids

// Gaussian blobs per class around 1-3 centers; samples appear class by class.
std::pair<Dataset, VictimMap> generate_synthetic(const SyntheticSpec& spec);

// Per class: seeded shuffle, then samples dealt round-robin over that class's
// victim clients. Union of the outputs is the input, exactly.
std::vector<Dataset> partition_by_victims(const Dataset& dataset, const VictimMap& victims,
                                          int num_clients, std::uint64_t seed);

struct ScalerParams {
    Vector min;
    Vector max;
};

ScalerParams fit_minmax(const Dataset& dataset);
// (x - min) / (max - min); constant features map to 0; values outside the
// fitted range are not clipped.
Dataset apply_minmax(const Dataset& dataset, const ScalerParams& scaler);

// Class c ends with round(multiplier_c * original) samples; synthetics are
// x + u*(x_nn - x) for a seeded base sample, one of its k nearest same-class
// neighbours and u ~ U[0,1]. Originals are retained. A single-sample class
// with multiplier > 1 is duplicated instead, with a logged warning.
Dataset smote_oversample(const Dataset& dataset, const std::vector<double>& multipliers,
                         int k, std::uint64_t seed);

// Labels become 0 (benign) / 1 (attack); idempotent.
Dataset collapse_to_binary(const Dataset& dataset);

struct CsvSchema {
    std::vector<std::string> feature_columns;
    std::string label_column;
    std::vector<std::string> class_names;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);

// Per-class seeded shuffle; the first round(fraction * n_c) of each class go
// to the first output.
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double train_fraction,
                                             std::uint64_t seed);

struct ServerDraw {
    Dataset first;
    Dataset second;
    Dataset rest;  // input rows not drawn into either set
};

// Two per-class draws without replacement (disjoint from each other), capped
// by availability. Carves the server's auxiliary and validation sets out of
// the training split; clients are partitioned from `rest`, so they never
// train on server-held samples.
ServerDraw draw_disjoint_per_class(const Dataset& dataset, Eigen::Index first_per_class,
                                   Eigen::Index second_per_class, std::uint64_t seed);

}  // namespace fedsim
