#pragma once

#include <optional>
#include <random>
#include <vector>

#include "fedsim/common.hpp"
#include "fedsim/data.hpp"
#include "fedsim/nn.hpp"

namespace fedsim {

enum class AdversaryKind { None, DataPoison, ModelPoison };
enum class FlipDirection { AttackToBenign, BenignToAttack };

struct AdversaryConfig {
    AdversaryKind kind = AdversaryKind::None;
    std::optional<FlipDirection> direction;  // data poisoning only
    double compromised_fraction = 0.0;
    double lambda_scale = 1.0;  // model poisoning only

    void validate() const;
};

// floor(fraction * n) clients drawn uniformly without replacement; the caller
// fixes the rng stream so the set stays constant for the whole experiment.
std::vector<int> select_compromised(const std::vector<int>& client_ids, double fraction,
                                    std::mt19937_64& rng);

// attack_to_benign: every nonzero label -> 0. benign_to_attack: every zero
// label -> the majority attack class present in this dataset (ties -> lowest
// index); a dataset with no attack samples falls back to class 1 with a
// logged warning.
Dataset flip_labels(const Dataset& dataset, FlipDirection direction);

// Every parameter multiplied by lambda; applied after honest local training.
ModelParams scale_model(const ModelParams& model, double lambda);

}  // namespace fedsim
