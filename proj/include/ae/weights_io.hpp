#pragma once

// AEW1 weights file, all integers little-endian:
//   "AEW1" | u32 version | u64 config hash | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 values

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ae/neuralnet.hpp"

namespace ae::nn {

std::vector<std::uint8_t> encode_weights(const ModelWeights& weights);
// Format errors on bad magic, unknown version, truncation or trailing bytes.
ModelWeights decode_weights(const std::vector<std::uint8_t>& bytes);

void save_weights(const ModelWeights& weights, const std::filesystem::path& path);

// Refuses (ConfigMismatch) weights whose hash, names or shapes do not belong
// to `config`.
ModelWeights load_weights(const std::filesystem::path& path, const ModelConfig& config);

}  // namespace ae::nn
