#include "v2c/experiment.hpp"

#include <unordered_map>

#include "v2c/error.hpp"
#include "v2c/vocabulary.hpp"

namespace v2c {

DatasetSplit split_clips(const std::vector<LoadedClip>& clips, double ratio, std::uint64_t seed) {
  if (ratio == 1.0) return DatasetSplit{clips, {}};
  std::vector<ClipRecord> records;
  std::unordered_map<std::string, const LoadedClip*> by_id;
  for (const auto& c : clips) {
    records.push_back(c.record);
    by_id[c.record.clip_id] = &c;
  }
  auto [train, test] = train_test_split(std::move(records), ratio, seed);
  DatasetSplit out;
  for (const auto& r : train) out.train.push_back(*by_id.at(r.clip_id));
  for (const auto& r : test) out.test.push_back(*by_id.at(r.clip_id));
  return out;
}

std::vector<LoadedClip> to_loaded(const SynthDataset& data) {
  std::vector<LoadedClip> out;
  out.reserve(data.clips.size());
  for (const auto& c : data.clips) out.push_back(LoadedClip{c.record, c.features});
  return out;
}

V2CParams model_for_data(ModelConfig config, const std::vector<LoadedClip>& train, Tensor mean_frame) {
  if (train.empty()) throw ValidationError("no training clips");
  std::vector<ClipRecord> records;
  std::vector<std::string> commands;
  for (const auto& c : train) {
    records.push_back(c.record);
    commands.push_back(c.record.command);
    if (c.features.rank() != 2 || c.features.dim(1) != mean_frame.size())
      throw DimensionError("clip " + c.record.clip_id + ": features " + shape_string(c.features.shape()) +
                           " do not match mean frame of size " + std::to_string(mean_frame.size()));
  }
  auto classes = action_classes(records);
  config.feature_dim = mean_frame.size();
  config.classes = classes.size();
  return make_model(config, Vocabulary::build(commands), std::move(classes), std::move(mean_frame));
}

std::vector<Example> make_examples(const std::vector<LoadedClip>& clips, const V2CParams& model) {
  std::vector<Example> out;
  out.reserve(clips.size());
  for (const auto& c : clips)
    out.push_back(make_example(c.record.clip_id, c.features, c.record.command, c.record.action, model));
  return out;
}

double exact_command_rate(V2CParams& model, const std::vector<LoadedClip>& clips) {
  if (clips.empty()) throw ValidationError("no clips to decode");
  std::size_t hits = 0;
  for (const auto& c : clips)
    if (split_words(infer_raw(c.features, model).command) == split_words(c.record.command)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(clips.size());
}

}  // namespace v2c
