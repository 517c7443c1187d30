#pragma once

// AHGC checkpoints (little-endian):
//   "AHGC" | u16 version=1 | u8 HGCN layer count |
//   repeated until EOF: u16 name length, UTF-8 name, u8 rank, u32 dims[rank], float32 data
// Optimizer moments are stored as "adam.m.<tensor>" / "adam.v.<tensor>" plus
// a one-element "adam.step" tensor.

#include <filesystem>
#include <optional>

#include "ahgcn/model.hpp"
#include "ahgcn/optimizer.hpp"

namespace ahgcn {

struct Checkpoint {
    ModelParams params;
    std::optional<AdamState> adam;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const AdamState* adam = nullptr);

// Rebuilds the model structure from tensor names and shapes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ahgcn
