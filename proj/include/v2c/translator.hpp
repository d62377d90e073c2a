#pragma once

#include <span>
#include <string>
#include <vector>

#include "v2c/recurrent.hpp"
#include "v2c/vocabulary.hpp"

namespace v2c {

// What fills the word slot of the decoder input at inference time.
enum class InferenceFeeding {
  zeros,           // zero vector at every step
  autoregressive,  // EMPTY one-hot first, then the previously emitted word
};

std::string to_string(InferenceFeeding f);
InferenceFeeding parse_inference_feeding(const std::string& text);

// Two-layer encoder-decoder. The decoder input at step t is [one_hot(word) ; h^e_t].
struct TranslatorParams {
  TranslatorParams() = default;
  TranslatorParams(CellKind kind, std::size_t feature_dim, std::size_t hidden, std::size_t vocab_size);

  std::vector<Parameter*> parameters();

  std::size_t feature_dim = 0;
  std::size_t hidden = 0;
  std::size_t vocab_size = 0;
  RnnParams encoder;
  RnnParams decoder;
  Parameter proj_W;  // [vocab x hidden]
  Parameter proj_b;  // [vocab]
  // Fixed initial states; zero unless configured otherwise.
  Tensor encoder_h0, encoder_c0, decoder_h0, decoder_c0;
};

// X [n x d] -> H_e [n x h], one encoder state per frame.
Var encode(Graph& g, Var X, TranslatorParams& p);

// Teacher-forced decoding, lockstep with the encoder: step t sees the previous
// target word (EMPTY at t = 0) and H_e[t]. Returns logits [n x vocab].
Var decode_train(Graph& g, Var H_e, const WordSequence& target, std::size_t bos_index, TranslatorParams& p);

// Mean softmax cross-entropy over the masked steps.
Var trans_loss(Graph& g, Var logits, const WordSequence& target);

struct GreedyDecode {
  std::vector<std::size_t> indices;  // emitted words, EOC included when reached
  bool truncated = false;            // no EOC within n steps
};

GreedyDecode decode_greedy(Graph& g, Var H_e, TranslatorParams& p, const Vocabulary& vocab,
                           InferenceFeeding feeding = InferenceFeeding::zeros);

struct AssembledCommand {
  std::string text;
  bool truncated = false;
};

// Joins the words preceding the first EOC; a missing EOC sets `truncated`.
AssembledCommand assemble_command(std::span<const std::string> words);

}  // namespace v2c
