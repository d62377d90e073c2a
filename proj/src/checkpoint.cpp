#include "v2c/checkpoint.hpp"

#include <map>
#include <set>

#include "binary_io.hpp"
#include "v2c/config_json.hpp"
#include "v2c/error.hpp"

namespace v2c {

using nlohmann::json;

json to_json(const ModelConfig& c) {
  return json{{"frames", c.frames},
              {"hidden", c.hidden},
              {"cell", to_string(c.cell)},
              {"feature_dim", c.feature_dim},
              {"classes", c.classes},
              {"joint", c.joint},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"seed", c.seed},
              {"inference_feeding", to_string(c.inference_feeding)},
              {"cls_loss", to_string(c.cls_loss)},
              {"cls_weight", c.cls_weight},
              {"filters", c.filters},
              {"fc_hidden", c.fc_hidden},
              {"initial_state", to_string(c.initial_state)},
              {"split_ratio", c.split_ratio},
              {"split_seed", c.split_seed}};
}

ModelConfig config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.frames = j.at("frames").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.cell = parse_cell_kind(j.at("cell").get<std::string>());
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
    c.joint = j.at("joint").get<bool>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.inference_feeding = parse_inference_feeding(j.at("inference_feeding").get<std::string>());
    c.cls_loss = parse_cls_loss(j.at("cls_loss").get<std::string>());
    c.cls_weight = j.at("cls_weight").get<double>();
    c.filters = j.at("filters").get<std::array<std::size_t, 3>>();
    c.fc_hidden = j.at("fc_hidden").get<std::size_t>();
    c.initial_state = parse_initial_state(j.at("initial_state").get<std::string>());
    c.split_ratio = j.at("split_ratio").get<double>();
    c.split_seed = j.at("split_seed").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model configuration: ") + e.what());
  }
}

namespace {

constexpr std::string_view kMagicPrefix = "V2C";

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

void write_tensor(detail::ByteWriter& out, const std::string& name, const Tensor& t) {
  out.str(name);
  out.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
  for (double v : t.values()) out.f64(v);
}

std::pair<std::string, Tensor> read_tensor(detail::ByteReader& in) {
  std::string name = in.str();
  const std::uint32_t rank = in.u32();
  if (rank == 0 || rank > 8) throw FormatError(in.source() + ": tensor '" + name + "' has invalid rank");
  Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape.push_back(in.u32());
    if (shape.back() == 0) throw FormatError(in.source() + ": tensor '" + name + "' has a zero dimension");
  }
  const std::size_t count = shape_size(shape);
  if (in.remaining() / 8 < count) throw TruncationError(in.source() + ": tensor '" + name + "' is truncated");
  std::vector<double> values(count);
  for (auto& v : values) v = in.f64();
  return {std::move(name), Tensor(std::move(shape), std::move(values))};
}

// Every stored tensor of the model: parameters first, then fixed tensors.
std::vector<std::pair<std::string, Tensor*>> model_tensors(V2CParams& m) {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto* p : m.parameters()) out.emplace_back(p->name, &p->value);
  auto& t = m.translator;
  out.emplace_back("translator.encoder.h0", &t.encoder_h0);
  out.emplace_back("translator.encoder.c0", &t.encoder_c0);
  out.emplace_back("translator.decoder.h0", &t.decoder_h0);
  out.emplace_back("translator.decoder.c0", &t.decoder_c0);
  out.emplace_back("data.mean_frame", &m.mean_frame);
  return out;
}

}  // namespace

std::vector<char> serialize_checkpoint(V2CParams& model, const TrainState& train) {
  const auto trainable = model.trainable();
  if (!train.adam.empty() && train.adam.size() != trainable.size()) {
    throw ValidationError("checkpoint: optimizer state does not cover the trainable parameters");
  }
  json steps = json::object();
  for (std::size_t i = 0; i < train.adam.size(); ++i) steps[trainable[i]->name] = train.adam[i].step_count;
  const json blob{{"format_version", kCheckpointVersion},
                  {"config", to_json(model.config)},
                  {"vocabulary", model.vocab.words()},
                  {"classes", model.classes},
                  {"epoch", train.epoch},
                  {"rng_state", train.rng_state},
                  {"adam_steps", steps}};

  detail::ByteWriter out;
  out.bytes(kMagicPrefix);
  out.bytes(std::to_string(kCheckpointVersion));
  out.str(blob.dump());

  const auto tensors = model_tensors(model);
  out.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) write_tensor(out, name, *t);

  out.u32(static_cast<std::uint32_t>(2 * train.adam.size()));
  for (std::size_t i = 0; i < train.adam.size(); ++i) {
    write_tensor(out, "adam.m/" + trainable[i]->name, train.adam[i].first_moment);
    write_tensor(out, "adam.v/" + trainable[i]->name, train.adam[i].second_moment);
  }
  return out.buffer();
}

Checkpoint deserialize_checkpoint(std::vector<char> bytes, const std::string& source) {
  detail::ByteReader in(std::move(bytes), source);
  if (in.remaining() < 4) throw TruncationError(source + ": file too short for a checkpoint header");
  const std::string magic = in.bytes(4);
  if (magic.substr(0, 3) != kMagicPrefix) throw FormatError(source + ": bad magic bytes, not a checkpoint");
  if (magic[3] != '0' + kCheckpointVersion) {
    throw VersionError(source + ": checkpoint version '" + magic.substr(3) + "' is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  json blob;
  try {
    blob = json::parse(in.str());
  } catch (const json::parse_error& e) {
    throw FormatError(source + ": malformed configuration blob: " + e.what());
  }
  if (blob.value("format_version", -1) != kCheckpointVersion) {
    throw VersionError(source + ": configuration blob has an unsupported format version");
  }

  Checkpoint ck;
  try {
    ModelConfig config = config_from_json(blob.at("config"));
    auto vocab = Vocabulary::from_words(blob.at("vocabulary").get<std::vector<std::string>>());
    auto classes = blob.at("classes").get<std::vector<std::string>>();
    ck.model = allocate_model(config, std::move(vocab), std::move(classes), Tensor({config.feature_dim}));
    ck.train.epoch = blob.at("epoch").get<std::size_t>();
    ck.train.rng_state = blob.at("rng_state").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(source + ": malformed configuration blob: " + e.what());
  }

  std::map<std::string, Tensor*> slots;
  for (auto& [name, t] : model_tensors(ck.model)) slots.emplace(name, t);
  std::set<std::string> filled;
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, value] = read_tensor(in);
    auto it = slots.find(name);
    if (it == slots.end()) throw UnknownTensorError(source + ": unknown tensor '" + name + "'");
    if (it->second->shape() != value.shape()) {
      throw FormatError(source + ": tensor '" + name + "' has shape " + shape_string(value.shape()) + ", expected " +
                        shape_string(it->second->shape()));
    }
    *it->second = std::move(value);
    filled.insert(name);
  }
  if (filled.size() != slots.size()) {
    for (const auto& [name, _] : slots) {
      if (!filled.contains(name)) throw FormatError(source + ": tensor '" + name + "' is missing");
    }
  }

  const auto trainable = ck.model.trainable();
  std::map<std::string, std::size_t> param_index;
  for (std::size_t i = 0; i < trainable.size(); ++i) param_index.emplace(trainable[i]->name, i);
  const std::uint32_t opt_count = in.u32();
  if (opt_count != 0) {
    if (opt_count != 2 * trainable.size()) {
      throw FormatError(source + ": optimizer section holds " + std::to_string(opt_count) + " tensors, expected " +
                        std::to_string(2 * trainable.size()));
    }
    ck.train.adam.resize(trainable.size());
    const auto steps_it = blob.find("adam_steps");
    if (steps_it == blob.end() || !steps_it->is_object()) throw FormatError(source + ": optimizer step counters missing");
    const json& steps = *steps_it;
    for (std::uint32_t i = 0; i < opt_count; ++i) {
      auto [name, value] = read_tensor(in);
      const bool first = name.starts_with("adam.m/");
      if (!first && !name.starts_with("adam.v/")) throw UnknownTensorError(source + ": unknown tensor '" + name + "'");
      auto it = param_index.find(name.substr(7));
      if (it == param_index.end()) throw UnknownTensorError(source + ": unknown tensor '" + name + "'");
      if (value.shape() != trainable[it->second]->value.shape()) {
        throw FormatError(source + ": optimizer tensor '" + name + "' has the wrong shape");
      }
      auto& state = ck.train.adam[it->second];
      (first ? state.first_moment : state.second_moment) = std::move(value);
      const auto count_it = steps.find(trainable[it->second]->name);
      if (count_it == steps.end() || !count_it->is_number_unsigned()) {
        throw FormatError(source + ": no step counter for '" + trainable[it->second]->name + "'");
      }
      state.step_count = count_it->get<std::uint64_t>();
    }
    for (const auto& s : ck.train.adam) {
      if (s.first_moment.empty() || s.second_moment.empty()) throw FormatError(source + ": incomplete optimizer state");
    }
  }
  if (!in.at_end()) throw FormatError(source + ": trailing bytes after the optimizer section");
  for (auto* p : ck.model.parameters()) p->zero_grad();
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, V2CParams& model, const TrainState& train) {
  detail::write_file(path, serialize_checkpoint(model, train));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(detail::read_file(path), path.string());
}

}  // namespace v2c
