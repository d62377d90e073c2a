#include "v2c/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "v2c/error.hpp"

namespace v2c::metrics {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(std::span<const std::string> words, std::size_t k) {
  NgramCounts out;
  if (words.size() < k) return out;
  for (std::size_t i = 0; i + k <= words.size(); ++i) ++out[std::vector<std::string>(words.begin() + i, words.begin() + i + k)];
  return out;
}

void require_pairs(std::span<const EvalPair> pairs, const char* metric) {
  if (pairs.empty()) throw ValidationError(std::string(metric) + ": no evaluation pairs");
  for (const auto& p : pairs) {
    if (p.reference.empty()) throw ValidationError(std::string(metric) + ": empty reference for clip '" + p.clip_id + "'");
  }
}

}  // namespace

double bleu(std::span<const EvalPair> pairs, int n) {
  if (n < 1 || n > 4) throw ValidationError("bleu: order must be in 1..4");
  require_pairs(pairs, "bleu");
  double log_precision = 0.0;
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
  for (const auto& p : pairs) {
    cand_len += p.candidate.size();
    ref_len += p.reference.size();
  }
  for (int k = 1; k <= n; ++k) {
    std::size_t matched = 0;
    std::size_t total = 0;
    std::size_t ref_total = 0;
    for (const auto& p : pairs) {
      const auto cand = ngrams(p.candidate, k);
      const auto ref = ngrams(p.reference, k);
      if (p.reference.size() >= static_cast<std::size_t>(k)) ref_total += p.reference.size() - k + 1;
      for (const auto& [gram, count] : cand) {
        total += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matched += std::min(count, it->second);
      }
    }
    // No k-grams on either side: the order is vacuous and counts as precision 1.
    if (total == 0 && ref_total == 0) continue;
    if (matched == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  return bp * std::exp(log_precision / n);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const EvalPair> pairs) {
  require_pairs(pairs, "rouge_l");
  constexpr double beta2 = 1.2 * 1.2;
  double total = 0.0;
  for (const auto& p : pairs) {
    if (p.candidate.empty()) continue;
    const auto lcs = static_cast<double>(lcs_length(p.candidate, p.reference));
    if (lcs == 0.0) continue;
    const double prec = lcs / static_cast<double>(p.candidate.size());
    const double rec = lcs / static_cast<double>(p.reference.size());
    total += ((1.0 + beta2) * rec * prec) / (rec + beta2 * prec);
  }
  return total / static_cast<double>(pairs.size());
}

double cider(std::span<const EvalPair> pairs) {
  if (pairs.size() < 2) throw ValidationError("cider: at least two clips are needed for document frequencies");
  require_pairs(pairs, "cider");
  const double log_n = std::log(static_cast<double>(pairs.size()));
  std::vector<double> scores(pairs.size(), 0.0);
  for (std::size_t k = 1; k <= 4; ++k) {
    std::map<std::vector<std::string>, std::size_t> df;
    std::vector<NgramCounts> cand(pairs.size()), ref(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      cand[i] = ngrams(pairs[i].candidate, k);
      ref[i] = ngrams(pairs[i].reference, k);
      for (const auto& [gram, _] : ref[i]) ++df[gram];
    }
    auto weight = [&](const std::vector<std::string>& gram, std::size_t tf) {
      auto it = df.find(gram);
      const double d = it == df.end() ? 1.0 : static_cast<double>(it->second);
      return static_cast<double>(tf) * (log_n - std::log(d));
    };
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      double dot = 0.0, nc = 0.0, nr = 0.0;
      for (const auto& [gram, tf] : cand[i]) {
        const double w = weight(gram, tf);
        nc += w * w;
        auto it = ref[i].find(gram);
        if (it != ref[i].end()) dot += w * weight(gram, it->second);
      }
      for (const auto& [gram, tf] : ref[i]) {
        const double w = weight(gram, tf);
        nr += w * w;
      }
      if (nc > 0.0 && nr > 0.0) scores[i] += 10.0 * dot / (std::sqrt(nc) * std::sqrt(nr)) / 4.0;
    }
  }
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(pairs.size());
}

namespace {

// Depth-first search over alignments that keep the maximal match count,
// pruning on chunk count. Candidate positions are visited in order. Heavily
// repetitive sentences can blow up the search, so it stops after a node
// budget and keeps the best alignment found so far.
class ChunkSearch {
 public:
  ChunkSearch(std::span<const std::string> cand, std::span<const std::string> ref, std::size_t target)
      : cand_(cand), ref_(ref), target_(target), used_(ref.size(), false) {
    for (std::size_t i = 0; i < cand.size(); ++i) {
      std::vector<std::size_t> pos;
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (ref[j] == cand[i]) pos.push_back(j);
      }
      options_.push_back(std::move(pos));
    }
    // Upper bound on matches obtainable from positions i.. onward.
    suffix_.assign(cand.size() + 1, 0);
    for (std::size_t i = cand.size(); i-- > 0;) suffix_[i] = suffix_[i + 1] + (options_[i].empty() ? 0 : 1);
  }

  std::size_t run() {
    best_ = cand_.size() + 1;
    visit(0, 0, 0, kNone, kNone);
    return best_;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  static constexpr std::size_t kNodeBudget = 1'000'000;

  void visit(std::size_t i, std::size_t matches, std::size_t chunks, std::size_t prev_cand, std::size_t prev_ref) {
    if (chunks >= best_ || ++nodes_ > kNodeBudget) return;
    if (matches + suffix_[i] < target_) return;
    if (i == cand_.size()) {
      best_ = chunks;
      return;
    }
    for (std::size_t j : options_[i]) {
      if (used_[j]) continue;
      const bool extends = prev_cand != kNone && prev_cand + 1 == i && prev_ref + 1 == j;
      used_[j] = true;
      visit(i + 1, matches + 1, chunks + (extends ? 0 : 1), i, j);
      used_[j] = false;
    }
    visit(i + 1, matches, chunks, prev_cand, prev_ref);
  }

  std::span<const std::string> cand_, ref_;
  std::size_t target_;
  std::vector<bool> used_;
  std::vector<std::vector<std::size_t>> options_;
  std::vector<std::size_t> suffix_;
  std::size_t best_ = 0;
  std::size_t nodes_ = 0;
};

}  // namespace

MeteorAlignment meteor_align(std::span<const std::string> candidate, std::span<const std::string> reference) {
  std::unordered_map<std::string, std::size_t> cand_counts, ref_counts;
  for (const auto& w : candidate) ++cand_counts[w];
  for (const auto& w : reference) ++ref_counts[w];
  std::size_t matches = 0;
  for (const auto& [w, c] : cand_counts) {
    auto it = ref_counts.find(w);
    if (it != ref_counts.end()) matches += std::min(c, it->second);
  }
  if (matches == 0) return {};
  return {matches, std::min(matches, ChunkSearch(candidate, reference, matches).run())};
}

double meteor_exact(std::span<const EvalPair> pairs) {
  require_pairs(pairs, "meteor");
  double total = 0.0;
  for (const auto& p : pairs) {
    const auto a = meteor_align(p.candidate, p.reference);
    if (a.matches == 0) continue;
    const double m = static_cast<double>(a.matches);
    const double prec = m / static_cast<double>(p.candidate.size());
    const double rec = m / static_cast<double>(p.reference.size());
    const double f = 10.0 * prec * rec / (rec + 9.0 * prec);
    const double penalty = 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3.0);
    total += f * (1.0 - penalty);
  }
  return total / static_cast<double>(pairs.size());
}

double action_success_rate(std::span<const std::string> predicted, std::span<const std::string> truth) {
  if (predicted.size() != truth.size()) {
    throw ValidationError("action_success_rate: " + std::to_string(predicted.size()) + " predictions for " +
                          std::to_string(truth.size()) + " clips");
  }
  if (truth.empty()) throw ValidationError("action_success_rate: no clips");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!predicted[i].empty() && predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

EvalReport score_pairs(std::span<const EvalPair> pairs) {
  EvalReport r;
  for (int n = 1; n <= 4; ++n) r.bleu[n - 1] = bleu(pairs, n);
  r.meteor = meteor_exact(pairs);
  r.rouge_l = rouge_l(pairs);
  r.cider = pairs.size() >= 2 ? cider(pairs) : 0.0;
  return r;
}

}  // namespace v2c::metrics
