#pragma once

#include <filesystem>
#include <vector>

#include "v2c/model.hpp"

namespace v2c {

// Checkpoint layout, all integers little-endian:
//   "V2C1"
//   u32 length + UTF-8 JSON blob (config, vocabulary, classes, epoch, rng and step counters)
//   u32 count, then per tensor: u32 length + UTF-8 name, u32 rank, rank x u32 dims, float64 values
//   u32 count, then optimizer moment tensors in the same encoding ("adam.m/<name>", "adam.v/<name>")
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  V2CParams model;
  TrainState train;
};

std::vector<char> serialize_checkpoint(V2CParams& model, const TrainState& train);
Checkpoint deserialize_checkpoint(std::vector<char> bytes, const std::string& source = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, V2CParams& model, const TrainState& train);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace v2c
