#pragma once

// Tag-to-text composition and contrastive target construction: the bridge
// from recognition outputs back into textual supervision.

#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "idea/core/tensor.hpp"
#include "idea/lexicon.hpp"
#include "idea/tagger.hpp"
#include "idea/tokenizer.hpp"

namespace idea {

struct TagTextPair {
  std::string original_text;
  std::string tag2text;  // possibly empty
  std::string combined;
};

// Empty unless the corrected vector added pseudo positives. Otherwise the
// space-joined names of the pseudo tags (plus the original tags when
// retain_original is set), in lexicon order, skipping names in removed_top.
inline std::string compose_tag2text(const TagVector& original, const TagVector& corrected,
                                    const TagLexicon& lexicon, bool retain_original,
                                    const std::vector<std::string>& removed_top = {}) {
  const std::size_t c = lexicon.entries.size();
  if (original.bits.size() != c || corrected.bits.size() != c)
    throw std::invalid_argument("compose_tag2text: tag vector length mismatch");
  bool any_pseudo = false;
  for (std::size_t i = 0; i < c; ++i) {
    if (corrected.bits[i] < original.bits[i])
      throw std::invalid_argument("compose_tag2text: corrected clears an original bit");
    if (corrected.bits[i] && !original.bits[i]) any_pseudo = true;
  }
  if (!any_pseudo) return "";
  std::unordered_set<std::string> removed(removed_top.begin(), removed_top.end());
  std::string out;
  for (const LexiconEntry& e : lexicon.entries) {
    std::size_t i = static_cast<std::size_t>(e.class_index);
    bool pseudo = corrected.bits[i] && !original.bits[i];
    bool keep = pseudo || (retain_original && original.bits[i]);
    if (!keep || removed.count(e.name)) continue;
    if (!out.empty()) out.push_back(' ');
    out += e.name;
  }
  return out;
}

inline TagTextPair concat_text(const std::string& original, const std::string& tag2text) {
  TagTextPair pair;
  pair.original_text = original;
  pair.tag2text = tag2text;
  pair.combined = tag2text.empty() ? original : original + " " + tag2text;
  return pair;
}

// Token budget favors the original caption: its tokens are kept intact up to
// max_content and tag tokens only fill the remaining space.
inline TokenizedText tokenize_pair(const TagTextPair& pair, const TextTokenizer& tokenizer,
                                   int max_content) {
  TokenizedText cap = tokenizer.encode(pair.original_text, max_content);
  TokenizedText out;
  out.ids = cap.ids;
  out.truncated = cap.truncated;
  int remaining = max_content - (static_cast<int>(cap.ids.size()) - 1);
  if (!pair.tag2text.empty()) {
    TokenizedText tags = tokenizer.encode(pair.tag2text, remaining);
    out.ids.insert(out.ids.end(), tags.ids.begin() + 1, tags.ids.end());
    out.truncated = out.truncated || tags.truncated;
  }
  return out;
}

// One combined text per image: each row's sole positive is its own column.
// The pseudo mask is carried for logging only.
inline core::Matrix build_itc_targets(long batch_size, const std::vector<std::uint8_t>& pseudo_mask) {
  if (static_cast<long>(pseudo_mask.size()) != batch_size)
    throw std::invalid_argument("build_itc_targets: mask length mismatch");
  return core::Matrix::Identity(batch_size, batch_size);
}

// Alternative target construction: the original text for every image plus one
// extra text column per pseudo-flagged image. A flagged image splits its
// target mass between its own text and its tag text; every text points back
// at its source image.
struct AltItcTargets {
  core::Matrix y_i2t;              // M x (M + P)
  core::Matrix y_t2i;              // (M + P) x M
  std::vector<int> tag_text_owner; // extra column k belongs to image tag_text_owner[k]
};

inline AltItcTargets build_itc_targets_alt(long batch_size,
                                           const std::vector<std::uint8_t>& pseudo_mask) {
  if (static_cast<long>(pseudo_mask.size()) != batch_size)
    throw std::invalid_argument("build_itc_targets_alt: mask length mismatch");
  AltItcTargets out;
  for (long i = 0; i < batch_size; ++i)
    if (pseudo_mask[i]) out.tag_text_owner.push_back(static_cast<int>(i));
  long p = static_cast<long>(out.tag_text_owner.size());
  out.y_i2t = core::Matrix::Zero(batch_size, batch_size + p);
  out.y_t2i = core::Matrix::Zero(batch_size + p, batch_size);
  for (long i = 0; i < batch_size; ++i) out.y_i2t(i, i) = 1.0;
  for (long k = 0; k < p; ++k) {
    long owner = out.tag_text_owner[static_cast<std::size_t>(k)];
    out.y_i2t(owner, owner) = 0.5;
    out.y_i2t(owner, batch_size + k) = 0.5;
  }
  for (long t = 0; t < batch_size; ++t) out.y_t2i(t, t) = 1.0;
  for (long k = 0; k < p; ++k)
    out.y_t2i(batch_size + k, out.tag_text_owner[static_cast<std::size_t>(k)]) = 1.0;
  return out;
}

}  // namespace idea
