#pragma once

// Weight persistence: one flat little-endian binary file plus a JSON sidecar
// (<path>.json) describing what the binary holds.
//
// Layout: magic "RDWT", u32 format version, the model config (i64 L, T, d,
// mlp_hidden; u8 mixer; i64 window; u8 depth_params_shared; u64 seed), u64
// tensor count, then per tensor: u32 name length, name bytes, u8 rank,
// rank x i64 dims, numel x f64 values. Tensors appear in the single
// declaration order for_each_weight fixes, so a load is a bit-exact inverse
// of a save. Writes go through a temp file + rename.

#include <string>
#include <utility>

#include "resdual/blocks.hpp"
#include "resdual/reports.hpp"

namespace resdual {

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

void save_weights(const std::string& path, const ModelConfig& cfg, const ModelWeights& w);
std::pair<ModelConfig, ModelWeights> load_weights(const std::string& path);

ordered_json weights_sidecar_json(const ModelConfig& cfg, const ModelWeights& w);

}  // namespace resdual
