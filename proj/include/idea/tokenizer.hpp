#pragma once

// Word-level text tokenizer over a corpus-built vocabulary. Reuses the
// tagger's tokenization rules so caption text, tag names and tag-composed
// text all split identically.

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "idea/tagger.hpp"

namespace idea {

struct TokenizedText {
  std::vector<int> ids;  // starts with the bos id
  bool truncated = false;
};

class TextTokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kUnk = 2;

  TextTokenizer() = default;

  explicit TextTokenizer(std::vector<std::string> vocab_tokens) {
    tokens_ = {"<pad>", "<bos>", "<unk>"};
    std::sort(vocab_tokens.begin(), vocab_tokens.end());
    vocab_tokens.erase(std::unique(vocab_tokens.begin(), vocab_tokens.end()), vocab_tokens.end());
    for (auto& t : vocab_tokens) tokens_.push_back(std::move(t));
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
  }

  // rebuild from a serialized token list (specials included, in order)
  static TextTokenizer from_token_list(std::vector<std::string> full) {
    if (full.size() < 3 || full[0] != "<pad>" || full[1] != "<bos>" || full[2] != "<unk>")
      throw std::invalid_argument("tokenizer: malformed token list");
    TextTokenizer t;
    t.tokens_ = std::move(full);
    for (std::size_t i = 0; i < t.tokens_.size(); ++i) t.index_[t.tokens_[i]] = static_cast<int>(i);
    return t;
  }

  static TextTokenizer build(const std::vector<std::string>& texts,
                             const std::vector<std::string>& extra_texts = {}) {
    std::vector<std::string> words;
    auto collect = [&](const std::string& t) {
      for (const std::string& w : normalize_text(t).tokens) words.push_back(w);
    };
    for (const auto& t : texts) collect(t);
    for (const auto& t : extra_texts) collect(t);
    return TextTokenizer(std::move(words));
  }

  int vocab_size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  // bos followed by up to max_content word ids; excess content is dropped
  TokenizedText encode(const std::string& text, int max_content) const {
    TokenizedText out;
    out.ids.push_back(kBos);
    auto norm = normalize_text(text);
    for (const std::string& w : norm.tokens) {
      if (static_cast<int>(out.ids.size()) - 1 >= max_content) {
        out.truncated = true;
        break;
      }
      out.ids.push_back(id_of(w));
    }
    return out;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace idea
