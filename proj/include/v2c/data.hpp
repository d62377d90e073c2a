#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "v2c/tensor.hpp"

namespace v2c {

// One demonstration clip as listed in an annotation file.
struct ClipRecord {
  std::string clip_id;
  std::string feature_path;  // as written in the file; relative paths resolve against the file's directory
  std::string action;
  std::string command;

  bool operator==(const ClipRecord&) const = default;
};

// Tab-separated: clip_id, feature_path, action, command. '#' lines are comments.
// Records whose command verb disagrees with the action field are kept (the
// action field wins) and reported through `warnings` when given.
std::vector<ClipRecord> load_annotations(const std::filesystem::path& path,
                                         std::vector<std::string>* warnings = nullptr);
void write_annotations(const std::filesystem::path& path, const std::vector<ClipRecord>& records);

std::filesystem::path resolve_feature_path(const std::filesystem::path& annotation_file, const ClipRecord& record);

struct LoadedClip {
  ClipRecord record;
  Tensor features;  // raw [T x d]
};

// Loads the feature file of every record; errors name the offending clip.
std::vector<LoadedClip> load_clips(const std::filesystem::path& annotation_file, const std::vector<ClipRecord>& records);

// Feature file: "V2CF", u32 T, u32 d, T*d float32, all little-endian, frames outer.
Tensor load_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const Tensor& frames);

// Mean-frame file: "V2CM", u32 d, d float32.
Tensor load_mean_frame(const std::filesystem::path& path);
void write_mean_frame(const std::filesystem::path& path, const Tensor& mean);

// n frame indices spread over T frames with a constant stride (identity when T < n).
std::vector<std::size_t> sample_frames(std::size_t T, std::size_t n);
// Sampled frames followed by copies of `mean_frame` up to n rows.
Tensor pad_features(const Tensor& frames, std::size_t n, const Tensor& mean_frame);
// Column means over all rows of all sequences.
Tensor mean_feature(const std::vector<Tensor>& sequences);

// Verb of a grammar-free "hand verb object ..." command: the second token.
std::string extract_action(const std::string& command);

// Seeded shuffle, then the first floor(ratio * N) records train.
std::pair<std::vector<ClipRecord>, std::vector<ClipRecord>> train_test_split(std::vector<ClipRecord> records,
                                                                             double ratio, std::uint64_t seed);

// Class names are the sorted distinct action strings.
std::vector<std::string> action_classes(const std::vector<ClipRecord>& records);

struct SynthSpec {
  std::size_t num_clips = 64;
  std::size_t hands = 3;
  std::size_t actions = 8;
  std::size_t objects = 6;
  std::size_t feature_dim = 32;
  std::size_t min_frames = 24;
  std::size_t max_frames = 48;
  double noise_sigma = 0.1;
  // Look-alike pairs: the second action copies the first one's embedding and
  // differs only in its temporal envelope.
  std::vector<std::pair<std::string, std::string>> confusion;
  // Vocabulary pools; generated names are used when a pool is shorter than requested.
  std::vector<std::string> hand_words{"righthand", "lefthand", "bothhands"};
  std::vector<std::string> action_words{"cut",  "pour",  "stir", "shake", "carry",  "place",
                                        "wipe", "press", "push", "pull",  "rotate", "transfer"};
  std::vector<std::string> object_words{"apple", "milk", "bowl", "knife", "sponge", "cup",  "bottle",
                                        "spoon", "box",  "lid",  "plate", "towel",  "powder"};

  void validate() const;
};

struct SynthClip {
  ClipRecord record;
  Tensor features;  // [T x d]
};

struct SynthDataset {
  std::vector<SynthClip> clips;
  Tensor mean_frame;
};

SynthDataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

// Writes annotations.tsv, features/<clip>.v2cf and mean.v2cm under `dir`.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& data);

}  // namespace v2c
