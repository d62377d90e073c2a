#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "v2c/data.hpp"
#include "v2c/model.hpp"

namespace v2c {

struct DatasetSplit {
  std::vector<LoadedClip> train;
  std::vector<LoadedClip> test;
};

// With ratio 1 every clip trains and the test side is empty.
DatasetSplit split_clips(const std::vector<LoadedClip>& clips, double ratio, std::uint64_t seed);

std::vector<LoadedClip> to_loaded(const SynthDataset& data);

// Completes `config` from the training clips (feature dimension, classes),
// builds the vocabulary from their commands and initialises the model.
V2CParams model_for_data(ModelConfig config, const std::vector<LoadedClip>& train, Tensor mean_frame);

std::vector<Example> make_examples(const std::vector<LoadedClip>& clips, const V2CParams& model);

// Fraction of clips whose decoded command equals the reference word for word.
double exact_command_rate(V2CParams& model, const std::vector<LoadedClip>& clips);

}  // namespace v2c
