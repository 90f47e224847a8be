#pragma once

#include <string>

#include "pad8/image.hpp"
#include "pad8/model.hpp"
#include "pad8/trainer.hpp"

namespace pad8 {

struct RunConfig {
    ModelSpec model;
    TrainConfig train;
    AugmentPolicy augment;
};

// Flat key=value file ('#' comments, blank lines allowed). Keys use the
// `model.`, `train.` and `augment.` prefixes; unknown keys are rejected and
// every value is validated before any work starts.
RunConfig load_config(const std::string& path, RunConfig base = {});

// single key=value assignment applied to a config (also used for CLI overrides)
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace pad8
