#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "idea/losses.hpp"
#include "idea/model.hpp"
#include "oracles.hpp"

using idea::EncoderConfig;
using idea::Image;
using idea::Matrix;
using idea::Model;
using idea::RecognitionHeadConfig;
namespace core = idea::core;

namespace {

idea::TagLexicon tiny_lexicon(int n) {
  idea::TagLexicon lex;
  for (int i = 0; i < n; ++i) {
    idea::LexiconEntry e;
    e.name = std::string(1, static_cast<char>('a' + i)) + "tag";
    e.frequency = 2 + i;
    e.class_index = i;
    lex.entries.push_back(e);
  }
  std::sort(lex.entries.begin(), lex.entries.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  for (int i = 0; i < n; ++i) lex.entries[i].class_index = i;
  lex.source_vocab_size = n;
  return lex;
}

Model tiny_model(int image_size = 32, int patch = 8, int width = 32, int classes = 6,
                 std::uint64_t seed = 7) {
  EncoderConfig ecfg;
  ecfg.image_size = image_size;
  ecfg.patch_size = patch;
  ecfg.width = width;
  ecfg.depth = 2;
  ecfg.heads = 2;
  ecfg.text_max_len = 8;
  ecfg.proj_dim = 16;
  RecognitionHeadConfig hcfg;
  hcfg.group_factor = 4;
  hcfg.decoder_heads = 2;
  idea::TextTokenizer tok =
      idea::TextTokenizer::build({"a red circle", "a blue square near a green cross"});
  return Model::create(ecfg, hcfg, tiny_lexicon(classes), tok, 0.07, seed);
}

Image noise_image(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Image img(size, size);
  for (auto& v : img.px) v = d(rng);
  return img;
}

}  // namespace

TEST_CASE("image encoder output shapes and determinism", "[model]") {
  Model m = tiny_model();
  Image img = noise_image(32, 1);
  auto enc = m.encode_image(img);
  CHECK(enc.global.rows() == 1);
  CHECK(enc.global.cols() == 32);
  CHECK(enc.spatial.rows() == 16);  // (32/8)^2
  CHECK(enc.spatial.cols() == 32);
  CHECK(enc.global.value().allFinite());

  SECTION("identical inputs produce identical outputs") {
    auto enc2 = m.encode_image(img);
    CHECK(enc.global.value() == enc2.global.value());
    CHECK(enc.spatial.value() == enc2.spatial.value());
  }
  SECTION("all-zero and all-one images embed differently") {
    auto z = m.encode_image(Image(32, 32, 0.0));
    auto o = m.encode_image(Image(32, 32, 1.0));
    CHECK((z.global.value() - o.global.value()).cwiseAbs().maxCoeff() > 1e-6);
  }
  SECTION("shape mismatch names expected and got") {
    CHECK_THROWS_WITH(m.encode_image(Image(16, 16, 0.5)),
                      Catch::Matchers::ContainsSubstring("expected 32x32x3") &&
                          Catch::Matchers::ContainsSubstring("got 16x16x3"));
  }
  SECTION("64x64 input with patch 8 gives 64 spatial rows") {
    Model m64 = tiny_model(64, 8);
    auto e = m64.encode_image(noise_image(64, 3));
    CHECK(e.spatial.rows() == 64);
  }
}

TEST_CASE("text encoder masking, truncation and vocabulary checks", "[model]") {
  Model m = tiny_model();
  auto ids = m.tokenizer.encode("a red circle", 8).ids;

  SECTION("explicit trailing padding does not change the embedding") {
    auto padded = ids;
    padded.push_back(idea::TextTokenizer::kPad);
    padded.push_back(idea::TextTokenizer::kPad);
    Matrix a = m.encode_text_ids(ids).value();
    Matrix b = m.encode_text_ids(padded).value();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("empty text encodes the lone start token") {
    Matrix a = m.encode_text_ids({}).value();
    Matrix b = m.encode_text_ids({idea::TextTokenizer::kBos}).value();
    CHECK(a == b);
    CHECK(a.allFinite());
  }
  SECTION("over-long text is truncated without error") {
    std::string longtext;
    for (int i = 0; i < 30; ++i) longtext += "red circle ";
    auto t = m.tokenizer.encode(longtext, m.ecfg.text_max_len);
    CHECK(t.truncated);
    CHECK(static_cast<int>(t.ids.size()) == 1 + m.ecfg.text_max_len);
    CHECK(m.encode_text_ids(t.ids).value().allFinite());
  }
  SECTION("out-of-vocabulary id is rejected") {
    CHECK_THROWS_AS(m.encode_text_ids({m.tokenizer.vocab_size()}), std::out_of_range);
  }
  SECTION("unknown words map to the unk id") {
    auto t = m.tokenizer.encode("xylophone", 8);
    REQUIRE(t.ids.size() == 2);
    CHECK(t.ids[1] == idea::TextTokenizer::kUnk);
  }
}

TEST_CASE("recognition head contract", "[model]") {
  Model m = tiny_model();
  Image img = noise_image(32, 5);
  auto enc = m.encode_image(img);
  auto logits = m.tag_logits(enc.spatial);
  CHECK(logits.rows() == 1);
  CHECK(logits.cols() == 6);

  SECTION("output length C regardless of spatial count") {
    Model m64 = tiny_model(64, 8);
    auto e = m64.encode_image(noise_image(64, 6));
    CHECK(m64.tag_logits(e.spatial).cols() == 6);
  }
  SECTION("permuting spatial rows leaves logits unchanged") {
    Matrix sp = enc.spatial.value();
    std::vector<int> perm(sp.rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(9);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix sp_perm(sp.rows(), sp.cols());
    for (long i = 0; i < sp.rows(); ++i) sp_perm.row(i) = sp.row(perm[i]);
    Matrix a = m.tag_logits(core::Tensor::constant(sp)).value();
    Matrix b = m.tag_logits(core::Tensor::constant(sp_perm)).value();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("zero spatial matrix gives a deterministic bias pathway output") {
    Matrix zeros = Matrix::Zero(16, 32);
    Matrix a = m.tag_logits(core::Tensor::constant(zeros)).value();
    Matrix b = m.tag_logits(core::Tensor::constant(zeros)).value();
    CHECK(a == b);
    CHECK(a.allFinite());
  }
  SECTION("non-finite spatial input is rejected") {
    Matrix bad = Matrix::Zero(16, 32);
    bad(3, 3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH(m.tag_logits(core::Tensor::constant(bad)),
                      Catch::Matchers::ContainsSubstring("non-finite"));
  }
  SECTION("query count covers the class count") {
    CHECK(m.head.num_queries() * m.head.group_factor() >= 6);
    RecognitionHeadConfig bad;
    bad.num_queries = 1;
    bad.group_factor = 2;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(idea::RecognitionHead(bad, 32, 6, rng), std::invalid_argument);
  }
}

TEST_CASE("projection and normalization", "[model]") {
  Model m = tiny_model();
  std::mt19937_64 rng(13);

  SECTION("any nonzero input maps to a unit vector") {
    for (int t = 0; t < 5; ++t) {
      Matrix v = core::random_normal(rng, 1, 32, 1.0);
      auto z = m.image_embedding({core::Tensor::constant(v), {}});
      CHECK(std::abs(z.value().norm() - 1.0) < 1e-6);
    }
  }
  SECTION("scaling input after a zero-bias projector keeps the direction") {
    core::Linear proj(8, 4, rng);
    proj.b.value().setZero();
    Matrix v = core::random_normal(rng, 1, 8, 1.0);
    Matrix a = idea::project_and_normalize(core::Tensor::constant(v), proj).value();
    Matrix b = idea::project_and_normalize(core::Tensor::constant(3.0 * v), proj).value();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("degenerate embedding is rejected") {
    core::Linear proj(4, 4, rng);
    proj.w.value().setZero();
    proj.b.value().setZero();
    Matrix v = core::random_normal(rng, 1, 4, 1.0);
    CHECK_THROWS_WITH(idea::project_and_normalize(core::Tensor::constant(v), proj),
                      "degenerate embedding");
  }
}

TEST_CASE("shape contract fuzz over random configurations", "[model]") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 6; ++t) {
    int patch = 4 + 4 * static_cast<int>(rng() % 2);       // 4 or 8
    int side = patch * (2 + static_cast<int>(rng() % 3));  // 2..4 patches per side
    int heads = 1 + static_cast<int>(rng() % 2);
    int width = heads * 8 * (1 + static_cast<int>(rng() % 2));
    int classes = 2 + static_cast<int>(rng() % 7);
    EncoderConfig ecfg;
    ecfg.image_size = side;
    ecfg.patch_size = patch;
    ecfg.width = width;
    ecfg.depth = 1;
    ecfg.heads = heads;
    ecfg.text_max_len = 4;
    ecfg.proj_dim = 8;
    RecognitionHeadConfig hcfg;
    hcfg.group_factor = 3;
    hcfg.decoder_heads = 1;
    auto tok = idea::TextTokenizer::build({"one two three"});
    Model m = Model::create(ecfg, hcfg, tiny_lexicon(classes), tok, 0.07, rng());
    auto enc = m.encode_image(noise_image(side, rng()));
    CHECK(enc.spatial.rows() == (side / patch) * (side / patch));
    CHECK(enc.spatial.cols() == width);
    auto logits = m.tag_logits(enc.spatial);
    CHECK(logits.cols() == classes);
    CHECK(m.image_embedding(enc).cols() == 8);
    CHECK(m.text_embedding(m.encode_text("one two")).cols() == 8);
  }
}

TEST_CASE("every parameter receives gradient from the total loss", "[model]") {
  Model m = tiny_model();

  auto enc0 = m.encode_image(noise_image(32, 21));
  auto enc1 = m.encode_image(noise_image(32, 22));
  auto logits = core::stack_rows({m.tag_logits(enc0.spatial), m.tag_logits(enc1.spatial)});
  std::vector<idea::TagVector> targets(2);
  targets[0].bits = {1, 0, 0, 1, 0, 0};
  targets[1].bits = {0, 1, 0, 0, 0, 1};
  idea::ClassWeights w{Eigen::VectorXd::Ones(6)};
  auto mlr = idea::mlr_loss(logits, targets, w, {}, 0);

  core::Tensor zi = core::stack_rows({m.image_embedding(enc0), m.image_embedding(enc1)});
  core::Tensor zt = core::stack_rows({m.text_embedding(m.encode_text("a red circle")),
                                      m.text_embedding(m.encode_text("a blue square"))});
  Matrix y = Matrix::Identity(2, 2);
  core::Tensor itc = idea::itc_loss_graph(zi, zt, m.log_temperature, y, y);
  core::Tensor total = idea::total_loss_graph(mlr.loss, itc);
  core::backward(total);

  int checked = 0;
  for (auto& [name, t] : m.parameters().items) {
    if (!t.requires_grad()) continue;  // frozen queries
    if (name == "text.pos") {
      // pad positions legitimately receive zero gradient; check used rows
      CHECK(t.grad().topRows(4).cwiseAbs().maxCoeff() > 0.0);
      ++checked;
      continue;
    }
    INFO(name);
    CHECK(t.grad().cwiseAbs().maxCoeff() > 0.0);
    ++checked;
  }
  CHECK(checked > 20);
}
