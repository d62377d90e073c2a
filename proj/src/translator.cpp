#include "v2c/translator.hpp"

#include "v2c/error.hpp"
#include "v2c/ops.hpp"
#include "v2c/tcn.hpp"

namespace v2c {

std::string to_string(InferenceFeeding f) { return f == InferenceFeeding::zeros ? "zeros" : "autoregressive"; }

InferenceFeeding parse_inference_feeding(const std::string& text) {
  if (text == "zeros") return InferenceFeeding::zeros;
  if (text == "autoregressive") return InferenceFeeding::autoregressive;
  throw ValidationError("unknown inference feeding '" + text + "' (expected zeros or autoregressive)");
}

TranslatorParams::TranslatorParams(CellKind kind, std::size_t d, std::size_t h, std::size_t vocab)
    : feature_dim(d), hidden(h), vocab_size(vocab) {
  auto make = [kind](const std::string& prefix, std::size_t in, std::size_t hid) {
    return kind == CellKind::lstm ? RnnParams(LstmParams(prefix, in, hid)) : RnnParams(GruParams(prefix, in, hid));
  };
  encoder = make("translator.encoder", d, h);
  decoder = make("translator.decoder", vocab + h, h);
  proj_W = Parameter("translator.proj.W", {vocab, h});
  proj_b = Parameter("translator.proj.b", {vocab});
  encoder_h0 = encoder_c0 = decoder_h0 = decoder_c0 = Tensor({h});
}

std::vector<Parameter*> TranslatorParams::parameters() {
  auto out = v2c::parameters(encoder);
  for (auto* p : v2c::parameters(decoder)) out.push_back(p);
  out.push_back(&proj_W);
  out.push_back(&proj_b);
  return out;
}

Var encode(Graph& g, Var X, TranslatorParams& p) {
  const Tensor& xv = g.value(X);
  if (xv.rank() != 2 || xv.dim(1) != p.feature_dim) {
    throw DimensionError("encode: expected [n x " + std::to_string(p.feature_dim) + "] features, got " +
                         shape_string(xv.shape()));
  }
  return unroll(g, X, p.encoder, initial_state(g, p.encoder, p.encoder_h0, p.encoder_c0));
}

Var decode_train(Graph& g, Var H_e, const WordSequence& target, std::size_t bos_index, TranslatorParams& p) {
  const Tensor& hv = g.value(H_e);
  if (hv.rank() != 2 || hv.dim(0) != target.length()) {
    throw ValidationError("decode_train: encoder states " + shape_string(hv.shape()) + " do not match target length " +
                          std::to_string(target.length()));
  }
  const Var W = g.param(p.proj_W);
  const Var b = g.param(p.proj_b);
  RnnState state = initial_state(g, p.decoder, p.decoder_h0, p.decoder_c0);
  std::vector<Var> logits;
  logits.reserve(target.length());
  for (std::size_t t = 0; t < target.length(); ++t) {
    const std::size_t prev = t == 0 ? bos_index : target.indices[t - 1];
    const Var word = g.constant(one_hot(prev, p.vocab_size));
    state = cell_step(g, ops::concat(g, word, ops::row(g, H_e, t)), state, p.decoder);
    logits.push_back(ops::affine(g, state.h, W, b));
  }
  return ops::stack_rows(g, logits);
}

Var trans_loss(Graph& g, Var logits, const WordSequence& target) {
  const Tensor& lv = g.value(logits);
  if (lv.rank() != 2 || lv.dim(0) != target.length()) {
    throw ValidationError("trans_loss: logits " + shape_string(lv.shape()) + " do not match target length " +
                          std::to_string(target.length()));
  }
  std::vector<Var> terms;
  for (std::size_t t = 0; t < target.length(); ++t) {
    if (!target.mask[t]) continue;
    terms.push_back(ops::softmax_cross_entropy(g, ops::row(g, logits, t), target.indices[t]));
  }
  if (terms.empty()) throw ValidationError("trans_loss: target has no real words");
  return ops::scale(g, ops::add_n(g, terms), 1.0 / static_cast<double>(terms.size()));
}

GreedyDecode decode_greedy(Graph& g, Var H_e, TranslatorParams& p, const Vocabulary& vocab, InferenceFeeding feeding) {
  const Tensor& hv = g.value(H_e);
  if (hv.rank() != 2 || hv.dim(1) != p.hidden) {
    throw DimensionError("decode_greedy: encoder states have shape " + shape_string(hv.shape()));
  }
  const Var W = g.param(p.proj_W);
  const Var b = g.param(p.proj_b);
  RnnState state = initial_state(g, p.decoder, p.decoder_h0, p.decoder_c0);
  GreedyDecode out;
  out.truncated = true;
  std::size_t prev = vocab.empty_index();
  for (std::size_t t = 0; t < hv.dim(0); ++t) {
    const Var word = g.constant(feeding == InferenceFeeding::zeros ? Tensor({p.vocab_size}) : one_hot(prev, p.vocab_size));
    state = cell_step(g, ops::concat(g, word, ops::row(g, H_e, t)), state, p.decoder);
    const std::size_t next = classify(g.value(ops::affine(g, state.h, W, b)).values());
    out.indices.push_back(next);
    prev = next;
    if (next == vocab.eoc_index()) {
      out.truncated = false;
      break;
    }
  }
  return out;
}

AssembledCommand assemble_command(std::span<const std::string> words) {
  AssembledCommand out;
  out.truncated = true;
  std::vector<std::string> kept;
  for (const auto& w : words) {
    if (w == kEocToken) {
      out.truncated = false;
      break;
    }
    kept.push_back(w);
  }
  out.text = join_words(kept);
  return out;
}

}  // namespace v2c
