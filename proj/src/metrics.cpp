#include "fedsim/metrics.hpp"

#include <string>

namespace fedsim {

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels, int num_classes) {
    if (predictions.size() != labels.size()) {
        throw ConfigError("predictions and labels differ in length");
    }
    if (num_classes < 1) {
        throw ConfigError("num_classes must be >= 1");
    }
    ConfusionMatrix cm;
    cm.counts.setZero(num_classes, num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int t = labels[i];
        int p = predictions[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw ConfigError("class index out of range at sample " + std::to_string(i));
        }
        cm.counts(t, p) += 1;
    }
    return cm;
}

MetricsSummary summarize(const ConfusionMatrix& cm, int positive_class) {
    const int nc = cm.num_classes();
    if (positive_class < 0 || positive_class >= nc) {
        throw ConfigError("positive_class out of range");
    }

    MetricsSummary s;
    s.positive_class = positive_class;

    long long tp = cm.counts(positive_class, positive_class);
    long long fp = cm.counts.col(positive_class).sum() - tp;
    long long fn = cm.counts.row(positive_class).sum() - tp;

    auto safe_div = [&s](double num, double den) {
        if (den == 0.0) {
            s.division_by_zero = true;
            return 0.0;
        }
        return num / den;
    };

    s.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
    s.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
    s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);

    s.accuracy = safe_div(static_cast<double>(cm.counts.diagonal().sum()),
                          static_cast<double>(cm.total()));

    s.per_class_accuracy.resize(static_cast<std::size_t>(nc), 0.0);
    s.empty_class.resize(static_cast<std::size_t>(nc), false);
    for (int c = 0; c < nc; ++c) {
        long long row = cm.counts.row(c).sum();
        if (row == 0) {
            s.empty_class[static_cast<std::size_t>(c)] = true;
        } else {
            s.per_class_accuracy[static_cast<std::size_t>(c)] =
                static_cast<double>(cm.counts(c, c)) / static_cast<double>(row);
        }
    }
    return s;
}

}  // namespace fedsim
