#pragma once

#include <cctype>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factsteer/common/hash.hpp"

namespace factsteer::model {

// Word-level hashing tokenizer for the toy backend. Id 0 is the terminator.
// Words of the form "t<k>" with 1 <= k < vocab map straight to id k, so
// decode() output re-encodes to the same ids.
class ToyTokenizer {
 public:
  explicit ToyTokenizer(int vocab_size) : vocab_(vocab_size) {}

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> ids;
    std::string word;
    auto flush = [&] {
      if (!word.empty()) {
        ids.push_back(word_id(word));
        word.clear();
      }
    };
    for (char c : text) {
      const auto uc = static_cast<unsigned char>(c);
      if (std::isalnum(uc) || c == '_') {
        word.push_back(static_cast<char>(std::tolower(uc)));
      } else {
        flush();
      }
    }
    flush();
    return ids;
  }

  std::string decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
      if (!out.empty()) out.push_back(' ');
      out += id == 0 ? std::string("<eos>") : "t" + std::to_string(id);
    }
    return out;
  }

  int word_id(std::string_view word) const {
    if (word.size() > 1 && word[0] == 't') {
      int k = 0;
      bool digits = true;
      for (std::size_t i = 1; i < word.size() && digits; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(word[i])) || k > vocab_) digits = false;
        else k = k * 10 + (word[i] - '0');
      }
      if (digits && k >= 1 && k < vocab_ && word[1] != '0') return k;
    }
    return 1 + static_cast<int>(fnv1a64(word) % static_cast<std::uint64_t>(vocab_ - 1));
  }

 private:
  int vocab_;
};

}  // namespace factsteer::model
