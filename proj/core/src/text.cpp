#include "gridvid/text.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

namespace gridvid {

size_t TextSequence::length() const {
  size_t n = 0;
  for (uint8_t m : mask) n += m;
  return n;
}

void TextSequence::validate() const {
  if (ids.size() != mask.size()) throw ContractError("TextSequence: ids/mask length mismatch");
  bool seen_pad = false;
  size_t real = 0;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= vocab_size) {
      throw IndexError("TextSequence: id " + std::to_string(ids[i]) + " outside [0," +
                       std::to_string(vocab_size) + ")");
    }
    if (mask[i]) {
      if (seen_pad) throw ContractError("TextSequence: pad positions must be contiguous at end");
      ++real;
    } else {
      seen_pad = true;
    }
  }
  if (real == 0) throw ContractError("TextSequence: needs at least one non-pad token");
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {}

const Vocabulary& Vocabulary::captions() {
  static const Vocabulary vocab({
      "<pad>", "digit", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
      "is", "moving", "moves", "up", "down", "left", "right", "then", "and", "while",
  });
  return vocab;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= words_.size()) {
    throw IndexError("Vocabulary: id " + std::to_string(id) + " out of range");
  }
  return words_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& word) const {
  for (size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] == word) return static_cast<int>(i);
  }
  throw TokenizerError("word not in vocabulary: '" + word + "'");
}

bool Vocabulary::contains(const std::string& word) const {
  return std::find(words_.begin(), words_.end(), word) != words_.end();
}

TextSequence Vocabulary::tokenize(const std::string& text, size_t max_len) const {
  std::string lowered;
  lowered.reserve(text.size());
  for (char ch : text) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));

  std::istringstream is(lowered);
  std::vector<int> token_ids;
  std::string word;
  while (is >> word) token_ids.push_back(id(word));
  if (token_ids.empty()) throw TokenizerError("empty text");
  if (token_ids.size() > max_len) {
    throw TokenizerError("text has " + std::to_string(token_ids.size()) +
                         " tokens, exceeding the maximum length " + std::to_string(max_len));
  }

  TextSequence seq;
  seq.vocab_size = words_.size();
  seq.ids.assign(max_len, 0);
  seq.mask.assign(max_len, 0);
  for (size_t i = 0; i < token_ids.size(); ++i) {
    seq.ids[i] = token_ids[i];
    seq.mask[i] = 1;
  }
  seq.validate();
  return seq;
}

std::string Vocabulary::detokenize(const TextSequence& seq) const {
  std::string out;
  for (size_t i = 0; i < seq.ids.size(); ++i) {
    if (!seq.mask[i]) break;
    if (!out.empty()) out.push_back(' ');
    out += word(seq.ids[i]);
  }
  return out;
}

}  // namespace gridvid
