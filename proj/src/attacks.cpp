#include "fedsim/attacks.hpp"

#include <algorithm>
#include <cmath>

namespace fedsim {

void AdversaryConfig::validate() const {
    if (compromised_fraction < 0.0 || compromised_fraction > 1.0) {
        throw ConfigError("compromised_fraction must lie in [0, 1]");
    }
    if (kind == AdversaryKind::ModelPoison && !(lambda_scale > 1.0)) {
        throw ConfigError("model poisoning requires lambda > 1");
    }
    if (kind == AdversaryKind::DataPoison && !direction.has_value()) {
        throw ConfigError("data poisoning requires a flip direction");
    }
}

std::vector<int> select_compromised(const std::vector<int>& client_ids, double fraction,
                                    std::mt19937_64& rng) {
    if (fraction < 0.0 || fraction > 1.0) {
        throw ConfigError("compromised fraction must lie in [0, 1]");
    }
    std::size_t take = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(client_ids.size())));
    std::vector<int> pool = client_ids;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    return pool;
}

Dataset flip_labels(const Dataset& dataset, FlipDirection direction) {
    Dataset out = dataset;
    if (direction == FlipDirection::AttackToBenign) {
        for (auto& l : out.labels) {
            if (l != 0) {
                l = 0;
            }
        }
        return out;
    }

    // benign_to_attack: find the majority attack class in this dataset.
    auto counts = dataset.class_counts();
    int target = -1;
    Eigen::Index best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > best) {
            best = counts[c];
            target = static_cast<int>(c);
        }
    }
    if (target < 0) {
        warn("benign_to_attack flip on a dataset with no attack samples; using class 1");
        target = 1;
        if (dataset.num_classes() < 2) {
            throw ConfigError("benign_to_attack needs at least two classes");
        }
    }
    for (auto& l : out.labels) {
        if (l == 0) {
            l = target;
        }
    }
    return out;
}

ModelParams scale_model(const ModelParams& model, double lambda) {
    if (!std::isfinite(lambda)) {
        throw ConfigError("scale factor must be finite");
    }
    ModelParams out = model;
    out.flat *= lambda;
    return out;
}

}  // namespace fedsim
