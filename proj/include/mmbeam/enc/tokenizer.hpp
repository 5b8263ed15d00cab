#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmbeam::enc {

constexpr int kUnkTokenId = 0;

// Closed vocabulary covering the machine-generated GPS prompts: template
// words, the eight compass words, punctuation/sign marks, and single digits.
// Numerals are split character-wise so coordinates become digit sequences.
inline std::vector<std::string> default_vocab() {
  std::vector<std::string> v = {
      "<unk>",     "the",  "vehicle",   "is",    "currently", "at",
      "latitude",  "longitude", "located",   "to",    "of",        "base",
      "station",   "north", "northeast", "east",  "southeast", "south",
      "southwest", "west",  "northwest", ",",     ".",         "-",
      "+"};
  for (char d = '0'; d <= '9'; ++d) v.emplace_back(1, d);
  return v;
}

inline std::unordered_map<std::string, int> vocab_lookup(
    const std::vector<std::string>& vocab) {
  std::unordered_map<std::string, int> m;
  for (size_t i = 0; i < vocab.size(); ++i) m[vocab[i]] = static_cast<int>(i);
  return m;
}

// Lowercased word tokens; digits, '.', ',', '-', '+' are single-character
// tokens. Unknown tokens map to <unk>.
inline std::vector<int> tokenize(const std::string& prompt,
                                 const std::unordered_map<std::string, int>& vocab) {
  if (prompt.empty()) throw std::invalid_argument("tokenize: empty prompt");
  std::vector<int> ids;
  auto emit = [&](const std::string& tok) {
    auto it = vocab.find(tok);
    ids.push_back(it == vocab.end() ? kUnkTokenId : it->second);
  };
  size_t i = 0;
  while (i < prompt.size()) {
    char ch = prompt[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(ch))) {
      std::string word;
      while (i < prompt.size() &&
             std::isalpha(static_cast<unsigned char>(prompt[i]))) {
        word.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(prompt[i]))));
        ++i;
      }
      emit(word);
    } else {
      emit(std::string(1, ch));
      ++i;
    }
  }
  if (ids.empty()) throw std::invalid_argument("tokenize: no tokens");
  return ids;
}

}  // namespace mmbeam::enc
