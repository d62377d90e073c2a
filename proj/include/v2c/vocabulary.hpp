#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "v2c/tensor.hpp"

namespace v2c {

inline constexpr std::string_view kEocToken = "EOC";
inline constexpr std::string_view kEmptyToken = "EMPTY";

std::vector<std::string> split_words(std::string_view command);
std::string join_words(std::span<const std::string> words);

// Dense word <-> index map whose last two entries are EOC then EMPTY.
class Vocabulary {
 public:
  // Words by descending corpus frequency, ties in lexicographic order. Reserved
  // tokens inside the corpus are not counted; they are always appended last.
  static Vocabulary build(std::span<const std::string> commands);
  // Restores a vocabulary from its index->word list.
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const noexcept { return words_.size(); }
  bool contains(std::string_view word) const;
  std::size_t index(std::string_view word) const;
  const std::string& word(std::size_t index) const;
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::size_t eoc_index() const noexcept { return eoc_; }
  std::size_t empty_index() const noexcept { return empty_; }

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t eoc_ = 0;
  std::size_t empty_ = 0;
};

// Exactly one 1.0 at `index`.
Tensor one_hot(std::size_t index, std::size_t size);

// Fixed-length word sequence: command words, EOC, then EMPTY padding.
struct WordSequence {
  std::vector<std::size_t> indices;
  std::vector<bool> mask;  // true for real words, EOC included

  std::size_t length() const noexcept { return indices.size(); }
  std::size_t real_count() const;
};

WordSequence encode_command(std::string_view command, const Vocabulary& vocab, std::size_t n);
// Words of the masked prefix, EOC included.
std::vector<std::string> decode_indices(const WordSequence& seq, const Vocabulary& vocab);

}  // namespace v2c
