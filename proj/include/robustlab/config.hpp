#pragma once

#include <map>
#include <string>

#include "robustlab/training.hpp"

namespace robustlab {

// A full experiment description: which model and data, plus the training
// hyperparameters. This is what the `key = value` config files (and the named
// recipes) expand to.
struct ExperimentConfig {
    Recipe::ModelKind model = Recipe::LinearKind;
    Recipe::Dataset dataset = Recipe::Mnist37;
    bool expert_init = false;
    TrainConfig train;
};

// Raw grammar layer: `key = value` per line, '#' starts a comment, blank
// lines ignored. Duplicate keys are an error. Values keep internal spaces but
// are trimmed at the ends.
std::map<std::string, std::string> parse_key_values(const std::string& text);

// Parses and validates a full config. Unknown keys are an error (the message
// lists the valid ones). Numeric values accept a "a/b" fraction form, so
// pixel-range budgets can be written as 8/255. When no `loss` key is given,
// the model kind picks it (linear -> softplus-binary, convnet ->
// softmax-xent).
ExperimentConfig parse_config_text(const std::string& text);

ExperimentConfig config_for_recipe(const Recipe& r);

std::map<std::string, std::string> config_to_map(const ExperimentConfig& c);
std::string config_to_text(const ExperimentConfig& c);

// Decimal or "a/b" fraction (8/255 and friends), shared by config values and
// CLI flags.
double parse_fraction_value(const std::string& name, const std::string& value);

}  // namespace robustlab
