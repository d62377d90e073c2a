#include "v2c/vocabulary.hpp"

#include <algorithm>
#include <map>

#include "v2c/error.hpp"

namespace v2c {

std::vector<std::string> split_words(std::string_view command) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < command.size()) {
    while (i < command.size() && (command[i] == ' ' || command[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < command.size() && command[j] != ' ' && command[j] != '\t') ++j;
    if (j > i) words.emplace_back(command.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

Vocabulary Vocabulary::build(std::span<const std::string> commands) {
  if (commands.empty()) throw ValidationError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& c : commands) {
    for (auto& w : split_words(c)) {
      if (w == kEocToken || w == kEmptyToken) continue;
      ++counts[w];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(ranked.size() + 2);
  for (auto& [w, _] : ranked) words.push_back(w);
  words.emplace_back(kEocToken);
  words.emplace_back(kEmptyToken);
  return from_words(std::move(words));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary v;
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.index_.emplace(v.words_[i], i).second) {
      throw ValidationError("vocabulary: duplicate word '" + v.words_[i] + "'");
    }
  }
  auto eoc = v.index_.find(std::string(kEocToken));
  auto empty = v.index_.find(std::string(kEmptyToken));
  if (eoc == v.index_.end() || empty == v.index_.end()) {
    throw ValidationError("vocabulary: EOC and EMPTY tokens are required");
  }
  v.eoc_ = eoc->second;
  v.empty_ = empty->second;
  return v;
}

bool Vocabulary::contains(std::string_view word) const { return index_.contains(std::string(word)); }

std::size_t Vocabulary::index(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) throw ValidationError("word '" + std::string(word) + "' is not in the vocabulary");
  return it->second;
}

const std::string& Vocabulary::word(std::size_t index) const {
  if (index >= words_.size()) throw ValidationError("vocabulary index " + std::to_string(index) + " out of range");
  return words_[index];
}

Tensor one_hot(std::size_t index, std::size_t size) {
  if (index >= size) {
    throw ValidationError("one_hot: index " + std::to_string(index) + " outside [0, " + std::to_string(size) + ")");
  }
  Tensor t({size});
  t[index] = 1.0;
  return t;
}

std::size_t WordSequence::real_count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

WordSequence encode_command(std::string_view command, const Vocabulary& vocab, std::size_t n) {
  const auto words = split_words(command);
  if (words.empty()) throw ValidationError("encode_command: empty command");
  if (words.size() + 1 > n) {
    throw ValidationError("encode_command: command of " + std::to_string(words.size()) +
                          " words does not fit in " + std::to_string(n) + " slots with EOC");
  }
  WordSequence seq;
  seq.indices.reserve(n);
  for (const auto& w : words) {
    if (!vocab.contains(w)) throw ValidationError("encode_command: out-of-vocabulary word '" + w + "'");
    seq.indices.push_back(vocab.index(w));
  }
  seq.indices.push_back(vocab.eoc_index());
  seq.mask.assign(seq.indices.size(), true);
  seq.indices.resize(n, vocab.empty_index());
  seq.mask.resize(n, false);
  return seq;
}

std::vector<std::string> decode_indices(const WordSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    if (seq.mask[t]) words.push_back(vocab.word(seq.indices[t]));
  }
  return words;
}

}  // namespace v2c
