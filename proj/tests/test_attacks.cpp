#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "fedsim/attacks.hpp"
#include "fedsim/common.hpp"
#include "fedsim/nn.hpp"

using namespace fedsim;

namespace {

Dataset labeled(const std::vector<int>& labels, int num_classes) {
    Dataset d;
    for (int c = 0; c < num_classes; ++c) {
        d.class_names.push_back("class" + std::to_string(c));
    }
    d.class_names[0] = "benign";
    d.features.resize(static_cast<Eigen::Index>(labels.size()), 2);
    for (Eigen::Index r = 0; r < d.features.rows(); ++r) {
        d.features(r, 0) = static_cast<double>(r);
        d.features(r, 1) = -static_cast<double>(r);
    }
    d.labels = labels;
    return d;
}

std::vector<int> id_range(int n) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ids[static_cast<std::size_t>(i)] = i;
    }
    return ids;
}

}  // namespace

TEST_CASE("compromised selection takes the floor of the fraction") {
    auto rng = make_rng(7, "compromised");
    CHECK(select_compromised(id_range(10), 0.0, rng).empty());

    auto rng63 = make_rng(7, "compromised");
    const auto chosen = select_compromised(id_range(63), 0.35, rng63);
    CHECK(chosen.size() == 22);
    CHECK(std::is_sorted(chosen.begin(), chosen.end()));
    CHECK(std::adjacent_find(chosen.begin(), chosen.end()) == chosen.end());
    for (int id : chosen) {
        CHECK(id >= 0);
        CHECK(id < 63);
    }
}

TEST_CASE("compromised selection replays under one seed") {
    auto rng1 = make_rng(11, "compromised");
    auto rng2 = make_rng(11, "compromised");
    auto rng3 = make_rng(12, "compromised");
    const auto a = select_compromised(id_range(40), 0.5, rng1);
    const auto b = select_compromised(id_range(40), 0.5, rng2);
    const auto c = select_compromised(id_range(40), 0.5, rng3);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a.size() == 20);
}

TEST_CASE("attack labels collapse onto benign") {
    const Dataset d = labeled({2, 1, 3, 2}, 4);
    const Dataset flipped = flip_labels(d, FlipDirection::AttackToBenign);
    for (int label : flipped.labels) {
        CHECK(label == 0);
    }
    CHECK(flipped.features == d.features);
    CHECK(flipped.size() == d.size());
}

TEST_CASE("benign labels move to the majority attack class") {
    // Classes present: {0, 2, 5} with class 2 in the majority.
    const Dataset d = labeled({0, 2, 5, 2, 0, 2, 5}, 6);
    const Dataset flipped = flip_labels(d, FlipDirection::BenignToAttack);
    CHECK(flipped.labels == std::vector<int>{2, 2, 5, 2, 2, 2, 5});
    CHECK(std::count(flipped.labels.begin(), flipped.labels.end(), 0) == 0);
}

TEST_CASE("a majority tie picks the lowest attack class") {
    const Dataset d = labeled({0, 3, 1, 3, 1}, 4);
    const Dataset flipped = flip_labels(d, FlipDirection::BenignToAttack);
    CHECK(flipped.labels == std::vector<int>{1, 3, 1, 3, 1});
}

TEST_CASE("flipping a benign-only dataset falls back to the first attack class") {
    const Dataset d = labeled({0, 0, 0}, 3);
    const Dataset flipped = flip_labels(d, FlipDirection::BenignToAttack);
    CHECK(flipped.labels == std::vector<int>{1, 1, 1});
}

TEST_CASE("model scaling is exact and keeps outputs stochastic") {
    const ModelParams model = init_model(dense_stack(4, {6}, 3), 19);

    const ModelParams same = scale_model(model, 1.0);
    CHECK(same.flat == model.flat);

    const ModelParams ten = scale_model(model, 10.0);
    for (Eigen::Index i = 0; i < model.flat.size(); ++i) {
        CHECK(ten.flat[i] == 10.0 * model.flat[i]);
    }

    const ModelParams extreme = scale_model(model, 40.0);
    Matrix X(2, 4);
    X << 0.3, -0.7, 1.2, 0.0,
         -2.0, 0.5, 0.1, 0.9;
    const Matrix p = forward(extreme, X);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-9);
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            CHECK(p(r, c) >= 0.0);
            CHECK(std::isfinite(p(r, c)));
        }
    }
}

TEST_CASE("adversary settings are validated") {
    AdversaryConfig ok;
    CHECK_NOTHROW(ok.validate());

    AdversaryConfig data_poison;
    data_poison.kind = AdversaryKind::DataPoison;
    data_poison.direction = FlipDirection::BenignToAttack;
    data_poison.compromised_fraction = 0.35;
    CHECK_NOTHROW(data_poison.validate());

    SUBCASE("fraction outside [0, 1]") {
        auto bad = data_poison;
        bad.compromised_fraction = 1.5;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
    SUBCASE("data poisoning needs a direction") {
        auto bad = data_poison;
        bad.direction.reset();
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
    SUBCASE("model poisoning needs amplification") {
        AdversaryConfig bad;
        bad.kind = AdversaryKind::ModelPoison;
        bad.compromised_fraction = 0.05;
        bad.lambda_scale = 1.0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
    SUBCASE("non-finite scale factor is rejected at application time") {
        const ModelParams model = init_model(dense_stack(3, {}, 2), 5);
        CHECK_THROWS_AS(scale_model(model, std::numeric_limits<double>::infinity()),
                        ConfigError);
    }
}
