#include <catch2/catch_amalgamated.hpp>

#include "idea/supervision.hpp"

using idea::TagLexicon;
using idea::TagVector;

namespace {

TagLexicon lexicon_of(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  TagLexicon lex;
  for (const auto& n : names) {
    idea::LexiconEntry e;
    e.name = n;
    e.frequency = 1;
    e.class_index = static_cast<int>(lex.entries.size());
    lex.entries.push_back(e);
  }
  return lex;
}

TagVector bits_for(const TagLexicon& lex, const std::vector<std::string>& names) {
  TagVector v;
  v.bits.assign(lex.entries.size(), 0);
  for (const auto& n : names) v.bits[static_cast<std::size_t>(lex.find(n)->class_index)] = 1;
  return v;
}

}  // namespace

TEST_CASE("compose_tag2text", "[supervision]") {
  // lexicon order is alphabetical: building, car, giraffe
  TagLexicon lex = lexicon_of({"giraffe", "car", "building"});

  SECTION("no new pseudo positives give the empty string") {
    TagVector orig = bits_for(lex, {"giraffe"});
    CHECK(idea::compose_tag2text(orig, orig, lex, true) == "");
  }
  SECTION("pseudo plus retained original tags, in lexicon order") {
    TagVector orig = bits_for(lex, {"giraffe"});
    TagVector corr = bits_for(lex, {"giraffe", "car", "building"});
    CHECK(idea::compose_tag2text(orig, corr, lex, true) == "building car giraffe");
  }
  SECTION("pseudo tags only when retain_original is off") {
    TagVector orig = bits_for(lex, {"giraffe"});
    TagVector corr = bits_for(lex, {"giraffe", "car", "building"});
    CHECK(idea::compose_tag2text(orig, corr, lex, false) == "building car");
  }
  SECTION("removed_top names are excluded") {
    TagVector orig = bits_for(lex, {"giraffe"});
    TagVector corr = bits_for(lex, {"giraffe", "car", "building"});
    CHECK(idea::compose_tag2text(orig, corr, lex, true, {"car"}) == "building giraffe");
  }
  SECTION("corrected must be a superset of original") {
    TagVector orig = bits_for(lex, {"giraffe"});
    TagVector corr = bits_for(lex, {"car"});
    CHECK_THROWS_AS(idea::compose_tag2text(orig, corr, lex, true), std::invalid_argument);
  }
  SECTION("deterministic and order-stable") {
    TagVector orig = bits_for(lex, {});
    TagVector corr = bits_for(lex, {"car", "giraffe"});
    std::string a = idea::compose_tag2text(orig, corr, lex, false);
    std::string b = idea::compose_tag2text(orig, corr, lex, false);
    CHECK(a == b);
    CHECK(a == "car giraffe");
  }
}

TEST_CASE("concat_text", "[supervision]") {
  SECTION("empty tag text is the identity") {
    auto pair = idea::concat_text("a giraffe", "");
    CHECK(pair.combined == "a giraffe");
  }
  SECTION("concatenation with one space") {
    auto pair = idea::concat_text("a giraffe", "car building");
    CHECK(pair.combined == "a giraffe car building");
  }
}

TEST_CASE("tokenize_pair truncates tag tokens before caption tokens", "[supervision]") {
  std::string caption;
  for (int i = 0; i < 39; ++i) caption += "word" + std::to_string(i % 7) + " ";
  idea::TextTokenizer tok = idea::TextTokenizer::build({caption, "tag0 tag1 tag2 tag3 tag4"});

  auto pair = idea::concat_text(caption, "tag0 tag1 tag2 tag3 tag4");
  auto ids = idea::tokenize_pair(pair, tok, 40);
  CHECK(static_cast<int>(ids.ids.size()) == 1 + 40);  // start token + content budget
  CHECK(ids.truncated);
  // last content token is the first tag token
  CHECK(ids.ids.back() == tok.id_of("tag0"));

  SECTION("caption tokens are never altered before the truncation point") {
    auto cap_only = tok.encode(caption, 40);
    for (std::size_t i = 0; i < cap_only.ids.size(); ++i) CHECK(ids.ids[i] == cap_only.ids[i]);
  }
  SECTION("no room for tags when the caption fills the budget") {
    std::string full;
    for (int i = 0; i < 45; ++i) full += "word" + std::to_string(i % 7) + " ";
    auto p2 = idea::concat_text(full, "tag0");
    auto ids2 = idea::tokenize_pair(p2, tok, 40);
    CHECK(static_cast<int>(ids2.ids.size()) == 41);
    CHECK(ids2.ids.back() != tok.id_of("tag0"));
  }
}

TEST_CASE("itc targets", "[supervision]") {
  SECTION("identity rows regardless of pseudo mask") {
    auto y = idea::build_itc_targets(3, {1, 0, 1});
    CHECK(y == idea::core::Matrix::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(y.row(i).sum() == 1.0);
  }
  SECTION("mask length must match") {
    CHECK_THROWS_AS(idea::build_itc_targets(3, {1, 0}), std::invalid_argument);
  }
  SECTION("alternative mode adds one column per flagged sample") {
    auto alt = idea::build_itc_targets_alt(3, {1, 0, 1});
    REQUIRE(alt.tag_text_owner == std::vector<int>{0, 2});
    CHECK(alt.y_i2t.rows() == 3);
    CHECK(alt.y_i2t.cols() == 5);
    CHECK(alt.y_t2i.rows() == 5);
    for (int i = 0; i < 3; ++i) CHECK(alt.y_i2t.row(i).sum() == Catch::Approx(1.0));
    for (int t = 0; t < 5; ++t) CHECK(alt.y_t2i.row(t).sum() == Catch::Approx(1.0));
    CHECK(alt.y_i2t(0, 0) == 0.5);
    CHECK(alt.y_i2t(0, 3) == 0.5);
    CHECK(alt.y_i2t(1, 1) == 1.0);
    CHECK(alt.y_t2i(3, 0) == 1.0);
    CHECK(alt.y_t2i(4, 2) == 1.0);
  }
  SECTION("targets are permutation-equivariant with the batch") {
    std::vector<std::uint8_t> mask = {1, 0, 0, 1};
    auto y = idea::build_itc_targets(4, mask);
    std::vector<int> perm = {2, 0, 3, 1};
    std::vector<std::uint8_t> mask_p(4);
    for (int i = 0; i < 4; ++i) mask_p[i] = mask[perm[i]];
    auto y_p = idea::build_itc_targets(4, mask_p);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(y_p(i, j) == y(perm[i], perm[j]));
  }
}
