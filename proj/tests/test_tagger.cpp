#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "idea/tagger.hpp"
#include "oracles.hpp"

using idea::TagLexicon;
using idea::TagVector;

namespace {

TagLexicon lexicon_of(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  TagLexicon lex;
  for (const auto& n : names) {
    idea::LexiconEntry e;
    e.name = n;
    e.is_compound = n.find(' ') != std::string::npos;
    e.frequency = 1;
    e.class_index = static_cast<int>(lex.entries.size());
    lex.entries.push_back(e);
  }
  lex.source_vocab_size = static_cast<long>(names.size());
  return lex;
}

std::vector<std::string> set_names(const TagVector& v, const TagLexicon& lex) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.bits.size(); ++i)
    if (v.bits[i]) out.push_back(lex.entries[i].name);
  return out;
}

}  // namespace

TEST_CASE("normalize_text lowercases, splits and lemmatizes", "[tagger]") {
  auto n = idea::normalize_text("Two dogs running");
  CHECK(n.tokens == std::vector<std::string>{"two", "dogs", "running"});
  CHECK(n.lemmas == std::vector<std::string>{"two", "dog", "running"});
  CHECK(n.joined == "two dogs running");

  SECTION("empty input") {
    auto e = idea::normalize_text("");
    CHECK(e.tokens.empty());
    CHECK(e.lemmas.empty());
    CHECK(e.joined.empty());
  }
  SECTION("hyphens and punctuation separate tokens") {
    auto h = idea::normalize_text("hot-dogs!");
    CHECK(h.tokens == std::vector<std::string>{"hot", "dogs"});
    CHECK(h.lemmas == std::vector<std::string>{"hot", "dog"});
  }
  SECTION("irregular plurals come from the exception table") {
    CHECK(idea::lemmatize_noun("children") == "child");
    CHECK(idea::lemmatize_noun("people") == "person");
    CHECK(idea::lemmatize_noun("wolves") == "wolf");
    CHECK(idea::lemmatize_noun("sheep") == "sheep");
  }
  SECTION("regular plural rules") {
    CHECK(idea::lemmatize_noun("cities") == "city");
    CHECK(idea::lemmatize_noun("boxes") == "box");
    CHECK(idea::lemmatize_noun("glasses") == "glass");
    CHECK(idea::lemmatize_noun("shoes") == "shoe");
    CHECK(idea::lemmatize_noun("bus") == "bus");
    CHECK(idea::lemmatize_noun("grass") == "grass");
    CHECK(idea::lemmatize_noun("is") == "is");
  }
}

TEST_CASE("extract_tags matches singles and leaves others unset", "[tagger]") {
  TagLexicon lex = lexicon_of({"giraffe", "zebra", "window", "car"});
  TagVector v = idea::extract_tags("a giraffe and a zebra by the window", lex);
  CHECK(set_names(v, lex) == std::vector<std::string>{"giraffe", "window", "zebra"});
  CHECK(v.source == TagVector::Source::extracted);

  SECTION("empty caption yields the zero vector") {
    TagVector z = idea::extract_tags("", lex);
    CHECK(z.count() == 0);
    CHECK(z.bits.size() == 4);
  }
  SECTION("plural forms fold onto singular tags") {
    TagVector p = idea::extract_tags("two zebras near windows", lex);
    CHECK(set_names(p, lex) == std::vector<std::string>{"window", "zebra"});
  }
}

TEST_CASE("compound tags suppress their inner single-word tags", "[tagger]") {
  TagLexicon lex = lexicon_of({"dog", "hot dog", "plate"});
  TagVector v = idea::extract_tags("a hot dog on a plate", lex);
  CHECK(set_names(v, lex) == std::vector<std::string>{"hot dog", "plate"});

  SECTION("the single word still matches elsewhere in the sentence") {
    TagVector w = idea::extract_tags("a dog stares at a hot dog", lex);
    CHECK(set_names(w, lex) == std::vector<std::string>{"dog", "hot dog"});
  }
  SECTION("compound matches on lemmatized sequence by default") {
    TagVector p = idea::extract_tags("two hot dogs", lex);
    CHECK(set_names(p, lex) == std::vector<std::string>{"hot dog"});
  }
  SECTION("strict mode matches compounds on raw text only") {
    TagVector s = idea::extract_tags("two hot dogs", lex, /*strict_compounds=*/true);
    // raw "hot dogs" does not equal "hot dog"; inner "dog" lemma matches
    CHECK(set_names(s, lex) == std::vector<std::string>{"dog"});
    TagVector s2 = idea::extract_tags("one hot dog", lex, /*strict_compounds=*/true);
    CHECK(set_names(s2, lex) == std::vector<std::string>{"hot dog"});
  }
  SECTION("removing the compound from the lexicon un-suppresses the inner word") {
    TagLexicon no_compound = lexicon_of({"dog", "plate"});
    TagVector u = idea::extract_tags("a hot dog on a plate", no_compound);
    CHECK(set_names(u, no_compound) == std::vector<std::string>{"dog", "plate"});
  }
}

TEST_CASE("batch_extract preserves order and matches elementwise", "[tagger]") {
  TagLexicon lex = lexicon_of({"cat", "tree"});
  std::vector<std::string> caps = {"a cat in a tree", "", "tree tree"};
  auto batch = idea::batch_extract(caps, lex);
  REQUIRE(batch.size() == 3);
  CHECK(batch[0] == idea::extract_tags(caps[0], lex));
  CHECK(batch[1] == idea::extract_tags(caps[1], lex));
  CHECK(batch[2] == idea::extract_tags(caps[2], lex));
  CHECK(idea::batch_extract({}, lex).empty());
}

TEST_CASE("extract_tags is pure and idempotent", "[tagger]") {
  TagLexicon lex = lexicon_of({"dog", "hot dog", "fire truck", "truck"});
  std::string caption = "a hot dog vendor near a fire truck";
  TagVector a = idea::extract_tags(caption, lex);
  TagVector b = idea::extract_tags(caption, lex);
  CHECK(a == b);
}

TEST_CASE("extract_tags agrees with the brute-force n-gram oracle", "[tagger]") {
  std::vector<std::string> names = {
      "dog", "hot dog", "cat", "car", "tree", "window",  "zebra",  "giraffe", "plate",
      "table", "fire truck", "truck", "fire", "street", "person", "traffic light",
      "light", "house", "boat", "river", "bench", "park", "coffee cup", "cup",
      "bird", "sky", "cloud", "grass", "field", "mountain"};
  TagLexicon lex = lexicon_of(names);

  std::vector<std::vector<std::string>> entry_tokens;
  for (const auto& e : lex.entries) {
    auto n = idea::normalize_text(e.name);
    entry_tokens.push_back(n.lemmas);
  }

  std::vector<std::string> fillers = {"a",  "the", "of",   "and",  "near", "with", "on",
                                      "in", "two", "some", "small", "big",  "red",  "old"};
  std::mt19937_64 rng(2024);
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };

  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    std::string caption;
    int len = 3 + static_cast<int>(rng() % 8);
    for (int w = 0; w < len; ++w) {
      std::string word;
      switch (rng() % 3) {
        case 0: word = pick(fillers); break;
        case 1: word = pick(names); break;
        default: {
          // plural form of a single-word name
          std::string n = pick(names);
          word = n.find(' ') == std::string::npos ? n + "s" : n;
          break;
        }
      }
      if (!caption.empty()) caption += " ";
      caption += word;
    }
    TagVector got = idea::extract_tags(caption, lex);
    auto lemmas = idea::normalize_text(caption).lemmas;
    auto expect = oracles::ngram_tag_oracle(lemmas, entry_tokens);
    REQUIRE(got.bits.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      INFO("caption: " << caption << " entry: " << lex.entries[i].name);
      CHECK(static_cast<int>(got.bits[i]) == expect[i]);
    }
    ++checked;
  }
  CHECK(checked == 200);
}
