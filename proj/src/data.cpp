#include "v2c/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "binary_io.hpp"
#include "v2c/error.hpp"
#include "v2c/rng.hpp"
#include "v2c/vocabulary.hpp"

namespace v2c {

namespace {

constexpr std::string_view kFeatureMagic = "V2CF";
constexpr std::string_view kMeanMagic = "V2CM";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

void expect_magic(detail::ByteReader& in, std::string_view magic) {
  if (in.remaining() < magic.size() || in.bytes(magic.size()) != magic) {
    throw FormatError(in.source() + ": bad magic bytes (expected \"" + std::string(magic) + "\")");
  }
}

}  // namespace

std::vector<ClipRecord> load_annotations(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open annotation file '" + path.string() + "'");
  std::vector<ClipRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw ParseError(path.string(), lineno, "expected 4 tab-separated fields, found " + std::to_string(fields.size()));
    }
    ClipRecord r{fields[0], fields[1], fields[2], fields[3]};
    if (r.clip_id.empty() || r.feature_path.empty() || r.action.empty()) {
      throw ParseError(path.string(), lineno, "empty clip_id, feature_path or action field");
    }
    if (split_words(r.command).empty()) throw ParseError(path.string(), lineno, "empty command");
    if (!seen.insert(r.clip_id).second) throw ParseError(path.string(), lineno, "duplicate clip_id '" + r.clip_id + "'");
    if (warnings != nullptr && extract_action(r.command) != r.action) {
      warnings->push_back(path.string() + ":" + std::to_string(lineno) + ": action '" + r.action + "' differs from command verb '" +
                          extract_action(r.command) + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_annotations(const std::filesystem::path& path, const std::vector<ClipRecord>& records) {
  std::string text = "# clip_id\tfeature_path\taction\tcommand\n";
  for (const auto& r : records) text += r.clip_id + '\t' + r.feature_path + '\t' + r.action + '\t' + r.command + '\n';
  detail::write_file(path, std::vector<char>(text.begin(), text.end()));
}

std::filesystem::path resolve_feature_path(const std::filesystem::path& annotation_file, const ClipRecord& record) {
  std::filesystem::path p(record.feature_path);
  if (p.is_absolute()) return p;
  return annotation_file.parent_path() / p;
}

std::vector<LoadedClip> load_clips(const std::filesystem::path& annotation_file, const std::vector<ClipRecord>& records) {
  std::vector<LoadedClip> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(LoadedClip{r, load_features(resolve_feature_path(annotation_file, r))});
  return out;
}

Tensor load_features(const std::filesystem::path& path) {
  detail::ByteReader in(detail::read_file(path), path.string());
  expect_magic(in, kFeatureMagic);
  const std::uint32_t T = in.u32();
  const std::uint32_t d = in.u32();
  if (T == 0) throw EmptySequenceError(path.string() + ": feature file holds zero frames");
  if (d == 0) throw FormatError(path.string() + ": feature dimension is zero");
  const std::size_t count = static_cast<std::size_t>(T) * d;
  if (in.remaining() < count * 4) {
    throw TruncationError(path.string() + ": header declares " + std::to_string(T) + "x" + std::to_string(d) +
                          " values but the payload is shorter");
  }
  if (in.remaining() > count * 4) {
    throw FormatError(path.string() + ": payload longer than the " + std::to_string(T) + "x" + std::to_string(d) +
                      " header declares");
  }
  Tensor out({T, d});
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = static_cast<double>(in.f32());
    if (!std::isfinite(out[i])) throw FormatError(path.string() + ": non-finite feature value");
  }
  return out;
}

void write_features(const std::filesystem::path& path, const Tensor& frames) {
  if (frames.rank() != 2) throw DimensionError("write_features: expected [T x d], got " + shape_string(frames.shape()));
  detail::ByteWriter out;
  out.bytes(kFeatureMagic);
  out.u32(static_cast<std::uint32_t>(frames.dim(0)));
  out.u32(static_cast<std::uint32_t>(frames.dim(1)));
  for (double v : frames.values()) out.f32(static_cast<float>(v));
  detail::write_file(path, out.buffer());
}

Tensor load_mean_frame(const std::filesystem::path& path) {
  detail::ByteReader in(detail::read_file(path), path.string());
  expect_magic(in, kMeanMagic);
  const std::uint32_t d = in.u32();
  if (d == 0) throw FormatError(path.string() + ": mean frame dimension is zero");
  if (in.remaining() != static_cast<std::size_t>(d) * 4) {
    if (in.remaining() < static_cast<std::size_t>(d) * 4) throw TruncationError(path.string() + ": truncated mean frame");
    throw FormatError(path.string() + ": payload longer than declared");
  }
  Tensor out({d});
  for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<double>(in.f32());
  return out;
}

void write_mean_frame(const std::filesystem::path& path, const Tensor& mean) {
  detail::ByteWriter out;
  out.bytes(kMeanMagic);
  out.u32(static_cast<std::uint32_t>(mean.size()));
  for (double v : mean.values()) out.f32(static_cast<float>(v));
  detail::write_file(path, out.buffer());
}

std::vector<std::size_t> sample_frames(std::size_t T, std::size_t n) {
  if (T == 0 || n == 0) throw ValidationError("sample_frames: T and n must be positive");
  std::vector<std::size_t> idx;
  if (T < n) {
    for (std::size_t i = 0; i < T; ++i) idx.push_back(i);
    return idx;
  }
  if (n == 1) return {0};
  // round(j (T-1) / (n-1)), half away from zero, in exact integer arithmetic
  const std::size_t den = n - 1;
  for (std::size_t j = 0; j < n; ++j) idx.push_back((2 * j * (T - 1) + den) / (2 * den));
  return idx;
}

Tensor pad_features(const Tensor& frames, std::size_t n, const Tensor& mean_frame) {
  if (frames.rank() != 2) throw DimensionError("pad_features: expected [T x d], got " + shape_string(frames.shape()));
  const std::size_t d = frames.dim(1);
  if (mean_frame.size() != d) {
    throw DimensionError("pad_features: mean frame of width " + std::to_string(mean_frame.size()) +
                         " does not match features of width " + std::to_string(d));
  }
  const auto idx = sample_frames(frames.dim(0), n);
  Tensor out({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    auto src = r < idx.size() ? frames.row(idx[r]) : mean_frame.values();
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Tensor mean_feature(const std::vector<Tensor>& sequences) {
  if (sequences.empty()) throw EmptySequenceError("mean_feature: no sequences");
  const std::size_t d = sequences.front().dim(1);
  Tensor mean({d});
  std::size_t rows = 0;
  for (const auto& s : sequences) {
    if (s.dim(1) != d) throw DimensionError("mean_feature: sequences differ in feature width");
    for (std::size_t r = 0; r < s.dim(0); ++r) {
      auto row = s.row(r);
      for (std::size_t i = 0; i < d; ++i) mean[i] += row[i];
    }
    rows += s.dim(0);
  }
  for (auto& v : mean.values()) v /= static_cast<double>(rows);
  return mean;
}

std::string extract_action(const std::string& command) {
  const auto words = split_words(command);
  return words.size() < 2 ? std::string() : words[1];
}

std::pair<std::vector<ClipRecord>, std::vector<ClipRecord>> train_test_split(std::vector<ClipRecord> records,
                                                                             double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("train_test_split: ratio must lie in (0, 1)");
  Rng rng(seed);
  rng.shuffle(records);
  const auto cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(records.size())));
  std::vector<ClipRecord> test(std::make_move_iterator(records.begin() + cut), std::make_move_iterator(records.end()));
  records.resize(cut);
  return {std::move(records), std::move(test)};
}

std::vector<std::string> action_classes(const std::vector<ClipRecord>& records) {
  std::set<std::string> names;
  for (const auto& r : records) names.insert(r.action);
  return {names.begin(), names.end()};
}

void SynthSpec::validate() const {
  if (num_clips == 0) throw ValidationError("synth: num_clips must be positive");
  if (hands == 0 || actions == 0 || objects == 0) throw ValidationError("synth: hands, actions and objects must be positive");
  if (feature_dim < hands + actions + objects) {
    throw ValidationError("synth: feature_dim must be at least hands + actions + objects");
  }
  if (min_frames == 0 || min_frames > max_frames) throw ValidationError("synth: invalid frame range");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ValidationError("synth: noise sigma must be >= 0");
}

namespace {

std::vector<std::string> take_words(const std::vector<std::string>& pool, std::size_t count, const std::string& stem) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(i < pool.size() ? pool[i] : stem + std::to_string(i));
  return out;
}

Tensor unit_vector(Rng& rng, std::size_t d) {
  Tensor v({d});
  double norm = 0.0;
  for (auto& x : v.values()) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v.values()) x /= norm;
  return v;
}

// Ramp up over the first `rise` of the clip, hold at 1, ramp down over the last `fall`.
struct Envelope {
  double rise = 0.25;
  double fall = 0.25;

  double operator()(double tau) const {
    if (tau < rise) return tau / rise;
    if (tau > 1.0 - fall) return (1.0 - tau) / fall;
    return 1.0;
  }
};

}  // namespace

SynthDataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto hands = take_words(spec.hand_words, spec.hands, "hand");
  const auto actions = take_words(spec.action_words, spec.actions, "action");
  const auto objects = take_words(spec.object_words, spec.objects, "object");
  const std::size_t d = spec.feature_dim;

  Rng rng(seed);
  std::vector<Tensor> hand_emb, action_emb, object_emb;
  for (std::size_t i = 0; i < spec.hands; ++i) hand_emb.push_back(unit_vector(rng, d));
  for (std::size_t i = 0; i < spec.actions; ++i) action_emb.push_back(unit_vector(rng, d));
  for (std::size_t i = 0; i < spec.objects; ++i) object_emb.push_back(unit_vector(rng, d));

  std::vector<Envelope> envelopes(spec.actions);
  auto action_index = [&](const std::string& name) {
    auto it = std::find(actions.begin(), actions.end(), name);
    if (it == actions.end()) throw ValidationError("synth: confusion action '" + name + "' is not among the actions");
    return static_cast<std::size_t>(it - actions.begin());
  };
  for (const auto& [a, b] : spec.confusion) {
    const std::size_t ia = action_index(a);
    const std::size_t ib = action_index(b);
    if (ia == ib) throw ValidationError("synth: an action cannot be its own look-alike");
    // Same embedding and the same time-averaged envelope; only the timing differs.
    action_emb[ib] = action_emb[ia];
    envelopes[ia] = Envelope{0.1, 0.5};
    envelopes[ib] = Envelope{0.5, 0.1};
  }

  SynthDataset out;
  std::vector<Tensor> all_frames;
  const std::size_t width = std::to_string(spec.num_clips).size();
  for (std::size_t c = 0; c < spec.num_clips; ++c) {
    const std::size_t a = c % spec.actions;
    const std::size_t h = rng.below(spec.hands);
    const std::size_t o = rng.below(spec.objects);
    const std::size_t T = spec.min_frames + rng.below(spec.max_frames - spec.min_frames + 1);
    Tensor frames({T, d});
    for (std::size_t t = 0; t < T; ++t) {
      const double tau = T == 1 ? 0.5 : static_cast<double>(t) / static_cast<double>(T - 1);
      const double env = envelopes[a](tau);
      for (std::size_t i = 0; i < d; ++i) {
        const double v = hand_emb[h][i] + object_emb[o][i] + env * action_emb[a][i] + spec.noise_sigma * rng.normal();
        frames.at(t, i) = static_cast<double>(static_cast<float>(v));  // stored as float32 on disk
      }
    }
    std::string id = std::to_string(c);
    id = "clip" + std::string(width - id.size(), '0') + id;
    ClipRecord rec{id, "features/" + id + ".v2cf", actions[a], hands[h] + " " + actions[a] + " " + objects[o]};
    all_frames.push_back(frames);
    out.clips.push_back(SynthClip{std::move(rec), std::move(frames)});
  }
  out.mean_frame = mean_feature(all_frames);
  for (auto& v : out.mean_frame.values()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& data) {
  std::filesystem::create_directories(dir / "features");
  std::vector<ClipRecord> records;
  for (const auto& clip : data.clips) {
    write_features(dir / clip.record.feature_path, clip.features);
    records.push_back(clip.record);
  }
  write_annotations(dir / "annotations.tsv", records);
  write_mean_frame(dir / "mean.v2cm", data.mean_frame);
}

}  // namespace v2c
