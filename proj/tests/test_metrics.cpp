#include <vector>

#include "doctest.h"
#include "fedsim/metrics.hpp"

using namespace fedsim;

TEST_CASE("perfect predictions produce a diagonal matrix and perfect scores") {
    const std::vector<int> labels = {0, 1, 2, 1, 0, 2};
    const ConfusionMatrix cm = confusion(labels, labels, 3);
    CHECK(cm.total() == 6);
    for (int t = 0; t < 3; ++t) {
        for (int p = 0; p < 3; ++p) {
            CHECK(cm.counts(t, p) == (t == p ? 2 : 0));
        }
    }
    const MetricsSummary m = summarize(cm, 1);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK(m.accuracy == 1.0);
    for (double a : m.per_class_accuracy) {
        CHECK(a == 1.0);
    }
    CHECK_FALSE(m.division_by_zero);
}

TEST_CASE("a constant predictor fills a single column") {
    const std::vector<int> labels = {0, 1, 2, 2};
    const std::vector<int> preds = {0, 0, 0, 0};
    const ConfusionMatrix cm = confusion(preds, labels, 3);
    CHECK(cm.counts.col(0).sum() == 4);
    CHECK(cm.counts.col(1).sum() == 0);
    CHECK(cm.counts.col(2).sum() == 0);
    CHECK(cm.counts(0, 0) == 1);
    CHECK(cm.counts(1, 0) == 1);
    CHECK(cm.counts(2, 0) == 2);
}

TEST_CASE("a ten-sample fixture matches the hand count") {
    //  true: 0 0 0 1 1 1 1 2 2 2
    //  pred: 0 1 0 1 1 0 2 2 2 0
    const std::vector<int> labels = {0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
    const std::vector<int> preds = {0, 1, 0, 1, 1, 0, 2, 2, 2, 0};
    const ConfusionMatrix cm = confusion(preds, labels, 3);
    Eigen::Matrix<long long, 3, 3> want;
    want << 2, 1, 0,
            1, 2, 1,
            1, 0, 2;
    CHECK(cm.counts == want);
    CHECK(cm.total() == 10);

    const MetricsSummary m = summarize(cm, 1);
    // Positive class 1: TP=2, FP=1, FN=2.
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall == doctest::Approx(0.5));
    CHECK(m.f1 == doctest::Approx(2.0 * (2.0 / 3.0) * 0.5 / (2.0 / 3.0 + 0.5)));
    CHECK(m.accuracy == doctest::Approx(0.6));
    CHECK(m.per_class_accuracy[0] == doctest::Approx(2.0 / 3.0));
    CHECK(m.per_class_accuracy[1] == doctest::Approx(0.5));
    CHECK(m.per_class_accuracy[2] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("binary detector summary matches hand arithmetic") {
    ConfusionMatrix cm;
    cm.counts.resize(2, 2);
    cm.counts << 50, 0,
                 5, 45;
    const MetricsSummary m = summarize(cm, 1);
    CHECK(m.precision == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(0.9));
    CHECK(m.f1 == doctest::Approx(0.947).epsilon(1e-3));
    CHECK(m.accuracy == doctest::Approx(0.95));
    CHECK_FALSE(m.division_by_zero);
}

TEST_CASE("an absent class scores zero and raises the empty flag") {
    ConfusionMatrix cm;
    cm.counts.resize(3, 3);
    cm.counts << 4, 0, 0,
                 0, 3, 0,
                 0, 0, 0;
    const MetricsSummary m = summarize(cm, 1);
    CHECK(m.per_class_accuracy[2] == 0.0);
    CHECK(m.empty_class[2]);
    CHECK_FALSE(m.empty_class[0]);
    CHECK_FALSE(m.empty_class[1]);
}

TEST_CASE("never predicting the positive class trips the zero-division flag") {
    ConfusionMatrix cm;
    cm.counts.resize(2, 2);
    cm.counts << 10, 0,
                 4, 0;
    const MetricsSummary m = summarize(cm, 1);
    CHECK(m.precision == 0.0);  // TP + FP = 0
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
    CHECK(m.division_by_zero);
}

TEST_CASE("overall accuracy is the row-weighted mean of per-class accuracy") {
    ConfusionMatrix cm;
    cm.counts.resize(3, 3);
    cm.counts << 7, 2, 1,
                 0, 5, 5,
                 3, 3, 14;
    const MetricsSummary m = summarize(cm, 0);
    double weighted = 0.0;
    const double total = static_cast<double>(cm.total());
    for (int c = 0; c < 3; ++c) {
        const double row = static_cast<double>(cm.counts.row(c).sum());
        weighted += m.per_class_accuracy[static_cast<std::size_t>(c)] * (row / total);
    }
    CHECK(std::abs(m.accuracy - weighted) <= 1e-12);
}

TEST_CASE("relabeling classes permutes per-class accuracy identically") {
    const std::vector<int> labels = {0, 0, 1, 1, 2, 2, 2, 1};
    const std::vector<int> preds = {0, 1, 1, 1, 2, 0, 2, 2};
    const MetricsSummary base = summarize(confusion(preds, labels, 3), 0);

    // Permutation sigma: 0->2, 1->0, 2->1.
    const std::vector<int> sigma = {2, 0, 1};
    std::vector<int> plabels, ppreds;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        plabels.push_back(sigma[static_cast<std::size_t>(labels[i])]);
        ppreds.push_back(sigma[static_cast<std::size_t>(preds[i])]);
    }
    const MetricsSummary permuted = summarize(confusion(ppreds, plabels, 3), 0);
    for (int c = 0; c < 3; ++c) {
        CHECK(permuted.per_class_accuracy[static_cast<std::size_t>(sigma[c])] ==
              base.per_class_accuracy[static_cast<std::size_t>(c)]);
    }
    CHECK(permuted.accuracy == doctest::Approx(base.accuracy).epsilon(1e-15));
}

TEST_CASE("confusion accounting rejects malformed input") {
    CHECK_THROWS_AS(confusion({0, 1}, {0}, 2), ConfigError);
    CHECK_THROWS_AS(confusion({0, 2}, {0, 1}, 2), ConfigError);
    CHECK_THROWS_AS(confusion({0, -1}, {0, 1}, 2), ConfigError);
}
