#pragma once

#include <string>

#include "fedsim/federation.hpp"

namespace fedsim {

// Strict parser: unknown keys are rejected by full path, missing keys fall
// back to defaults, and the result is validated before it is returned.
ExperimentConfig config_from_json(const std::string& text);

// Canonical full form; config_from_json(config_to_json(c)) reproduces c.
std::string config_to_json(const ExperimentConfig& config);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

}  // namespace fedsim
