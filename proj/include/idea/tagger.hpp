#pragma once

// Caption -> tag bits. Tokenization, noun lemmatization, and single/compound
// tag matching against the lexicon. Also hosts build_lexicon, since corpus
// frequencies are counted with the matcher defined here.
//
// Tokenizer convention: ASCII is lowercased; letters, digits and non-ASCII
// bytes form tokens; everything else (including hyphens) separates tokens and
// is dropped.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "idea/lexicon.hpp"

namespace idea {

struct NormalizedText {
  std::vector<std::string> tokens;  // lowercase surface tokens
  std::vector<std::string> lemmas;  // index-aligned noun lemmas
  std::string joined;               // tokens joined by single spaces
};

struct TagVector {
  enum class Source { extracted, corrected };
  std::vector<std::uint8_t> bits;
  Source source = Source::extracted;

  int count() const {
    int n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  bool operator==(const TagVector& o) const { return bits == o.bits && source == o.source; }
};

// ---------------------------------------------------------------------------
// noun lemmatization: irregular/invariant exception table, then plural rules

inline std::string lemmatize_noun(const std::string& token) {
  static const std::unordered_map<std::string, std::string> exceptions = {
      {"men", "man"},         {"women", "woman"},     {"children", "child"},
      {"people", "person"},   {"feet", "foot"},       {"teeth", "tooth"},
      {"geese", "goose"},     {"mice", "mouse"},      {"lice", "louse"},
      {"oxen", "ox"},         {"wolves", "wolf"},     {"knives", "knife"},
      {"leaves", "leaf"},     {"lives", "life"},      {"wives", "wife"},
      {"shelves", "shelf"},   {"halves", "half"},     {"calves", "calf"},
      {"loaves", "loaf"},     {"thieves", "thief"},   {"scarves", "scarf"},
      {"elves", "elf"},       {"hooves", "hoof"},     {"potatoes", "potato"},
      {"tomatoes", "tomato"}, {"heroes", "hero"},     {"echoes", "echo"},
      {"torpedoes", "torpedo"}, {"volcanoes", "volcano"}, {"mosquitoes", "mosquito"},
      {"buffaloes", "buffalo"}, {"mangoes", "mango"}, {"dominoes", "domino"},
      {"movies", "movie"},    {"cookies", "cookie"},  {"zombies", "zombie"},
      {"quizzes", "quiz"},    {"buses", "bus"},       {"lenses", "lens"},
      {"mustaches", "mustache"}, {"headaches", "headache"}, {"aches", "ache"},
      {"caches", "cache"},    {"quiches", "quiche"},
      {"sheep", "sheep"},     {"deer", "deer"},       {"fish", "fish"},
      {"moose", "moose"},     {"aircraft", "aircraft"}, {"series", "series"},
      {"species", "species"}, {"news", "news"},       {"lens", "lens"},
  };
  auto it = exceptions.find(token);
  if (it != exceptions.end()) return it->second;

  const std::size_t n = token.size();
  if (n < 4 || token.back() != 's') return token;
  auto ends_with = [&](const char* suf) {
    std::size_t m = std::char_traits<char>::length(suf);
    return n >= m && token.compare(n - m, m, suf) == 0;
  };
  if (ends_with("sses")) return token.substr(0, n - 2);                       // classes -> class
  if (ends_with("xes") || ends_with("ches") || ends_with("shes") || ends_with("zzes"))
    return token.substr(0, n - 2);                                            // boxes -> box
  if (ends_with("ies")) {
    if (n > 4) return token.substr(0, n - 3) + "y";                           // cities -> city
    return token.substr(0, n - 1);                                            // ties -> tie
  }
  if (ends_with("ss") || ends_with("us") || ends_with("is")) return token;    // grass, bus, axis
  return token.substr(0, n - 1);                                              // dogs -> dog
}

inline NormalizedText normalize_text(const std::string& text) {
  NormalizedText out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    out.tokens.push_back(cur);
    out.lemmas.push_back(lemmatize_noun(cur));
    if (!out.joined.empty()) out.joined.push_back(' ');
    out.joined += cur;
    cur.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch) || ch >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// matcher
//
// Single-word tags match when the tag's lemma equals any caption lemma.
// Compound tags match as contiguous runs over the lemma sequence (or over the
// raw token sequence in strict mode). A single-word match inside a matched
// compound span is suppressed; occurrences elsewhere still count.

class TagMatcher {
 public:
  explicit TagMatcher(const TagLexicon& lexicon, bool strict_compounds = false)
      : num_classes_(lexicon.num_classes()), strict_(strict_compounds) {
    for (const LexiconEntry& e : lexicon.entries) {
      NormalizedText n = normalize_text(e.name);
      if (n.tokens.empty()) continue;
      if (n.tokens.size() == 1) {
        singles_[n.lemmas[0]].push_back(e.class_index);
      } else {
        Compound c;
        c.tokens = strict_ ? n.tokens : n.lemmas;
        c.class_index = e.class_index;
        compounds_.push_back(std::move(c));
      }
    }
  }

  TagVector extract(const std::string& text) const {
    NormalizedText n = normalize_text(text);
    TagVector out;
    out.bits.assign(num_classes_, 0);
    const auto& seq = strict_ ? n.tokens : n.lemmas;
    std::vector<char> covered(seq.size(), 0);
    for (const Compound& c : compounds_) {
      const std::size_t len = c.tokens.size();
      if (seq.size() < len) continue;
      for (std::size_t start = 0; start + len <= seq.size(); ++start) {
        bool match = true;
        for (std::size_t k = 0; k < len; ++k)
          if (seq[start + k] != c.tokens[k]) { match = false; break; }
        if (match) {
          out.bits[c.class_index] = 1;
          for (std::size_t k = 0; k < len; ++k) covered[start + k] = 1;
        }
      }
    }
    for (std::size_t i = 0; i < n.lemmas.size(); ++i) {
      if (covered[i]) continue;
      auto it = singles_.find(n.lemmas[i]);
      if (it == singles_.end()) continue;
      for (int idx : it->second) out.bits[idx] = 1;
    }
    return out;
  }

 private:
  struct Compound {
    std::vector<std::string> tokens;
    int class_index = 0;
  };
  std::unordered_map<std::string, std::vector<int>> singles_;
  std::vector<Compound> compounds_;
  int num_classes_ = 0;
  bool strict_ = false;
};

inline TagVector extract_tags(const std::string& text, const TagLexicon& lexicon,
                              bool strict_compounds = false) {
  return TagMatcher(lexicon, strict_compounds).extract(text);
}

inline std::vector<TagVector> batch_extract(const std::vector<std::string>& captions,
                                            const TagLexicon& lexicon,
                                            bool strict_compounds = false) {
  TagMatcher matcher(lexicon, strict_compounds);
  std::vector<TagVector> out;
  out.reserve(captions.size());
  for (const std::string& c : captions) out.push_back(matcher.extract(c));
  return out;
}

// ---------------------------------------------------------------------------
// lexicon construction
//
// Frequencies are per-caption document counts under the matcher rules above
// (a compound occurrence does not count its inner single words). Retains
// entries with frequency >= min_count, then drops the remove_top_t most
// frequent survivors, ties broken alphabetically. Frequencies are counted once
// against the full base vocabulary and kept as counted.

inline TagLexicon build_lexicon(const std::vector<std::string>& captions,
                                const std::vector<std::string>& base_vocab, long min_count,
                                long remove_top_t, bool strict_compounds = false) {
  if (base_vocab.empty()) throw std::invalid_argument("build_lexicon: base_vocab is empty");
  if (min_count < 1) throw std::invalid_argument("build_lexicon: min_count must be >= 1");
  if (remove_top_t < 0) throw std::invalid_argument("build_lexicon: remove_top_t must be >= 0");

  std::vector<std::string> names;
  names.reserve(base_vocab.size());
  for (const std::string& raw : base_vocab) {
    std::string name = normalize_text(raw).joined;
    if (name.empty())
      throw std::invalid_argument("build_lexicon: vocab entry normalizes to empty: '" + raw + "'");
    names.push_back(std::move(name));
  }
  std::sort(names.begin(), names.end());
  for (std::size_t i = 1; i < names.size(); ++i)
    if (names[i] == names[i - 1])
      throw std::invalid_argument("build_lexicon: duplicate vocab entry '" + names[i] + "'");

  TagLexicon provisional;
  provisional.source_vocab_size = static_cast<long>(base_vocab.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    LexiconEntry e;
    e.name = names[i];
    e.is_compound = e.name.find(' ') != std::string::npos;
    e.class_index = static_cast<int>(i);
    provisional.entries.push_back(std::move(e));
  }

  TagMatcher matcher(provisional, strict_compounds);
  std::vector<long> freq(names.size(), 0);
  for (const std::string& caption : captions) {
    TagVector v = matcher.extract(caption);
    for (std::size_t i = 0; i < freq.size(); ++i) freq[i] += v.bits[i];
  }

  std::vector<LexiconEntry> retained;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (freq[i] >= min_count) {
      LexiconEntry e = provisional.entries[i];
      e.frequency = freq[i];
      retained.push_back(std::move(e));
    }
  }

  std::vector<LexiconEntry> by_freq = retained;
  std::sort(by_freq.begin(), by_freq.end(), [](const LexiconEntry& a, const LexiconEntry& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.name < b.name;
  });
  std::vector<std::string> removed;
  std::unordered_set<std::string> removed_set;
  for (long t = 0; t < remove_top_t && t < static_cast<long>(by_freq.size()); ++t) {
    removed.push_back(by_freq[t].name);
    removed_set.insert(by_freq[t].name);
  }

  TagLexicon out;
  out.source_vocab_size = provisional.source_vocab_size;
  out.removed_top = std::move(removed);
  for (LexiconEntry& e : retained) {
    if (removed_set.count(e.name)) continue;
    e.class_index = static_cast<int>(out.entries.size());
    out.entries.push_back(std::move(e));
  }
  if (out.entries.empty()) throw std::runtime_error("lexicon empty after filtering");
  return out;
}

}  // namespace idea
