#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace v2c::metrics {

// One clip: generated words against its single reference command.
struct EvalPair {
  std::string clip_id;
  std::vector<std::string> candidate;
  std::vector<std::string> reference;
};

// Corpus BLEU-n with clipped k-gram precisions for k = 1..n and brevity
// penalty exp(min(0, 1 - R/C)) on total lengths. Zero if any precision is zero;
// an order with no k-grams in any candidate or reference has precision 1.
double bleu(std::span<const EvalPair> pairs, int n);

// Mean per-pair LCS F-measure with beta = 1.2.
double rouge_l(std::span<const EvalPair> pairs);

// Plain CIDEr (no length penalty), scaled by 10. Document frequencies come
// from the references; IDF = log(N / max(1, df)).
double cider(std::span<const EvalPair> pairs);

// METEOR restricted to exact unigram matches: maximal one-to-one alignment
// with the fewest chunks, F = 10PR/(R+9P), penalty 0.5 (chunks/m)^3.
double meteor_exact(std::span<const EvalPair> pairs);

// Fraction of exact string matches; an empty prediction never matches.
double action_success_rate(std::span<const std::string> predicted, std::span<const std::string> truth);

// Per-pair pieces, exposed for tests.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};
MeteorAlignment meteor_align(std::span<const std::string> candidate, std::span<const std::string> reference);

struct EvalReport {
  double bleu[4] = {0, 0, 0, 0};
  double meteor = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  double action_success_translation = 0.0;
  std::optional<double> action_success_classification;  // absent for the EDNet baseline
};

// Fills every caption score from the pairs. CIDEr is left at 0 for a single pair.
EvalReport score_pairs(std::span<const EvalPair> pairs);

}  // namespace v2c::metrics
