#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fedsim/common.hpp"

namespace fedsim {

// Rows are true labels, columns are predictions.
struct ConfusionMatrix {
    Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> counts;

    int num_classes() const { return static_cast<int>(counts.rows()); }
    long long total() const { return counts.sum(); }
};

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels, int num_classes);

struct MetricsSummary {
    // One-vs-rest counts for the positive class.
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<bool> empty_class;  // true where the class has no true samples
    bool division_by_zero = false;  // any precision/recall/f1 denominator was 0
    int positive_class = 1;
};

// Derives precision/recall/F1 for the positive class (one-vs-rest), overall
// accuracy, and per-class accuracy. Division by zero yields 0 and sets the
// flag instead of throwing.
MetricsSummary summarize(const ConfusionMatrix& cm, int positive_class);

}  // namespace fedsim
