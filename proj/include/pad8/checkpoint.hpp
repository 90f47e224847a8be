#pragma once

#include <cstdint>
#include <string>

#include "pad8/model.hpp"

namespace pad8 {

struct CheckpointMeta {
    ModelSpec spec;
    uint64_t prompt_digest = 0;
    uint64_t seed = 0;
    uint32_t epoch = 0;
};

struct LoadedCheckpoint {
    CheckpointMeta meta;
    Model model;
};

// Little-endian binary container: magic "C8CK", format version, ModelSpec,
// prompt-set digest, seed, epoch, a named tensor table (name, dtype, shape,
// byte offset) and the raw f32 payload. Saving a loaded checkpoint
// reproduces the byte stream exactly.
void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::string& path);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace pad8
