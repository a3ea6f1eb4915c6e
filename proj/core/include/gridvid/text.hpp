#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridvid/errors.hpp"

namespace gridvid {

// Tokenized condition text: ids padded to a fixed length N, pad positions
// contiguous at the end, at least one real token.
struct TextSequence {
  std::vector<int> ids;        // length N; pad id is 0
  std::vector<uint8_t> mask;   // 1 = real token, 0 = pad
  size_t vocab_size = 0;

  size_t padded_length() const { return ids.size(); }
  size_t length() const;  // non-pad count

  void validate() const;
};

// Fixed word list covering every caption the scene templates can produce.
class Vocabulary {
 public:
  static const Vocabulary& captions();

  explicit Vocabulary(std::vector<std::string> words);

  size_t size() const { return words_.size(); }
  const std::string& word(int id) const;
  int id(const std::string& word) const;          // TokenizerError on OOV
  bool contains(const std::string& word) const;

  // Lowercases, splits on whitespace, pads to max_len.
  TextSequence tokenize(const std::string& text, size_t max_len) const;
  std::string detokenize(const TextSequence& seq) const;

 private:
  std::vector<std::string> words_;
};

}  // namespace gridvid
