#pragma once

// Dual encoders and the recognition head. The image encoder is a small ViT
// (patch embedding, class token, learned positions, pre-norm blocks); the
// text encoder is the same trunk over token embeddings with key masking for
// padding. The recognition head cross-attends fixed random group queries to
// the spatial tokens and maps each query to its group of class logits.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "idea/core/nn.hpp"
#include "idea/core/optim.hpp"
#include "idea/core/rng.hpp"
#include "idea/core/tensor.hpp"
#include "idea/image.hpp"
#include "idea/lexicon.hpp"
#include "idea/tokenizer.hpp"

namespace idea {

using core::Matrix;
using core::Tensor;

struct EncoderConfig {
  int image_size = 64;
  int patch_size = 8;
  int width = 128;
  int depth = 2;
  int heads = 4;
  int mlp_ratio = 4;
  int text_vocab = 0;     // filled in when the tokenizer is built
  int text_max_len = 40;  // content tokens; the start token is extra
  int proj_dim = 256;

  int patches_per_side() const { return image_size / patch_size; }
  int spatial_tokens() const { return patches_per_side() * patches_per_side(); }

  void validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
      throw std::invalid_argument("encoder config: image_size must be divisible by patch_size");
    if (width <= 0 || heads <= 0 || width % heads != 0)
      throw std::invalid_argument("encoder config: width must be divisible by heads");
    if (depth < 1 || text_max_len < 1 || proj_dim < 1 || mlp_ratio < 1)
      throw std::invalid_argument("encoder config: non-positive field");
  }
};

struct RecognitionHeadConfig {
  int num_queries = 0;  // 0 = derive as ceil(C / group_factor)
  int group_factor = 16;
  int decoder_dim = 0;  // 0 = encoder width
  int decoder_heads = 4;

  int resolve_queries(int num_classes) const {
    if (num_queries > 0) return num_queries;
    return (num_classes + group_factor - 1) / group_factor;
  }
  int resolve_dim(int encoder_width) const { return decoder_dim > 0 ? decoder_dim : encoder_width; }
};

struct EncoderOutput {
  Tensor global;   // 1 x width
  Tensor spatial;  // S x width
};

// ---------------------------------------------------------------------------

inline Matrix patchify(const Image& img, int patch) {
  const int side = img.width / patch;
  Matrix out(static_cast<long>(side) * side, static_cast<long>(patch) * patch * 3);
  long row = 0;
  for (int py = 0; py < side; ++py) {
    for (int px_ = 0; px_ < side; ++px_) {
      long col = 0;
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x)
          for (int c = 0; c < 3; ++c) out(row, col++) = img.at(py * patch + y, px_ * patch + x, c);
      ++row;
    }
  }
  return out;
}

class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const EncoderConfig& cfg, std::mt19937_64& rng)
      : cfg_(cfg),
        patch_embed_(static_cast<long>(cfg.patch_size) * cfg.patch_size * 3, cfg.width, rng),
        final_ln_(cfg.width) {
    double emb_std = 1.0 / std::sqrt(static_cast<double>(cfg.width));
    cls_ = Tensor::leaf(core::random_normal(rng, 1, cfg.width, emb_std), true);
    pos_ = Tensor::leaf(core::random_normal(rng, 1 + cfg.spatial_tokens(), cfg.width, emb_std),
                        true);
    for (int i = 0; i < cfg.depth; ++i) blocks_.emplace_back(cfg.width, cfg.heads, rng, cfg.mlp_ratio);
  }

  EncoderOutput encode(const Image& img) const {
    if (img.height != cfg_.image_size || img.width != cfg_.image_size)
      throw std::invalid_argument(
          "encode_image: expected " + std::to_string(cfg_.image_size) + "x" +
          std::to_string(cfg_.image_size) + "x3, got " + std::to_string(img.height) + "x" +
          std::to_string(img.width) + "x3");
    Tensor x = patch_embed_(Tensor::constant(patchify(img, cfg_.patch_size)));
    x = core::stack_rows({cls_, x});
    x = core::add(x, pos_);
    for (const auto& block : blocks_) x = block(x);
    x = final_ln_(x);
    return {core::slice_rows(x, 0, 1), core::slice_rows(x, 1, cfg_.spatial_tokens())};
  }

  void collect(const std::string& prefix, core::ParamList& out) const {
    patch_embed_.collect(prefix + ".patch", out);
    out.add(prefix + ".cls", cls_);
    out.add(prefix + ".pos", pos_);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
    final_ln_.collect(prefix + ".final", out);
  }

 private:
  EncoderConfig cfg_;
  core::Linear patch_embed_;
  Tensor cls_, pos_;
  std::vector<core::TransformerBlock> blocks_;
  core::LayerNorm final_ln_;
};

class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const EncoderConfig& cfg, std::mt19937_64& rng) : cfg_(cfg), final_ln_(cfg.width) {
    if (cfg.text_vocab < 3) throw std::invalid_argument("text encoder: vocabulary not set");
    double emb_std = 1.0 / std::sqrt(static_cast<double>(cfg.width));
    tok_emb_ = Tensor::leaf(core::random_normal(rng, cfg.text_vocab, cfg.width, emb_std), true);
    pos_ = Tensor::leaf(core::random_normal(rng, 1 + cfg.text_max_len, cfg.width, emb_std), true);
    for (int i = 0; i < cfg.depth; ++i) blocks_.emplace_back(cfg.width, cfg.heads, rng, cfg.mlp_ratio);
  }

  // global embedding at the start-token position; padding is masked out of
  // attention, so explicit trailing pads cannot change the result
  Tensor encode(const std::vector<int>& ids) const {
    const int len = 1 + cfg_.text_max_len;
    std::vector<int> padded;
    padded.reserve(len);
    if (ids.empty()) padded.push_back(TextTokenizer::kBos);
    for (int id : ids) {
      if (id < 0 || id >= cfg_.text_vocab)
        throw std::out_of_range("encode_text: token id " + std::to_string(id) +
                                " outside vocabulary of " + std::to_string(cfg_.text_vocab));
      if (static_cast<int>(padded.size()) < len) padded.push_back(id);
    }
    while (static_cast<int>(padded.size()) < len) padded.push_back(TextTokenizer::kPad);

    Matrix mask(1, len);
    for (int i = 0; i < len; ++i) mask(0, i) = padded[i] == TextTokenizer::kPad ? -1e30 : 0.0;
    Tensor key_mask = Tensor::constant(mask);

    Tensor x = core::add(core::embed_rows(tok_emb_, padded), pos_);
    for (const auto& block : blocks_) x = block(x, key_mask);
    x = final_ln_(x);
    return core::slice_rows(x, 0, 1);
  }

  void collect(const std::string& prefix, core::ParamList& out) const {
    out.add(prefix + ".tok_emb", tok_emb_);
    out.add(prefix + ".pos", pos_);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
    final_ln_.collect(prefix + ".final", out);
  }

 private:
  EncoderConfig cfg_;
  Tensor tok_emb_, pos_;
  std::vector<core::TransformerBlock> blocks_;
  core::LayerNorm final_ln_;
};

class RecognitionHead {
 public:
  RecognitionHead() = default;
  RecognitionHead(const RecognitionHeadConfig& cfg, int encoder_width, int num_classes,
                  std::mt19937_64& rng)
      : num_classes_(num_classes),
        k_(cfg.resolve_queries(num_classes)),
        g_(cfg.group_factor),
        dd_(cfg.resolve_dim(encoder_width)) {
    if (k_ < 1) throw std::invalid_argument("recognition head: need at least one query");
    if (static_cast<long>(k_) * g_ < num_classes)
      throw std::invalid_argument("recognition head: num_queries * group_factor < num_classes");
    queries_ = Tensor::leaf(core::random_normal(rng, k_, dd_, 1.0), false);  // frozen
    has_in_proj_ = dd_ != encoder_width;
    if (has_in_proj_) in_proj_ = core::Linear(encoder_width, dd_, rng);
    cross_ = core::MultiheadAttention(dd_, cfg.decoder_heads, rng);
    ln1_ = core::LayerNorm(dd_);
    ln2_ = core::LayerNorm(dd_);
    fc1_ = core::Linear(dd_, 4 * dd_, rng);
    fc2_ = core::Linear(4 * dd_, dd_, rng);
    for (int i = 0; i < k_; ++i) group_fc_.emplace_back(dd_, g_, rng);
  }

  // queries cross-attend to the spatial tokens, pass through feed-forward
  // layers, then each query maps to its group of logits; outputs beyond the
  // class count are discarded
  Tensor logits(const Tensor& spatial) const {
    if (!spatial.value().allFinite())
      throw std::runtime_error("recognition head: non-finite spatial input");
    Tensor kv = has_in_proj_ ? in_proj_(spatial) : spatial;
    Tensor x = ln1_(core::add(queries_, cross_(queries_, kv)));
    x = ln2_(core::add(x, fc2_(core::gelu(fc1_(x)))));
    std::vector<Tensor> parts;
    parts.reserve(k_);
    for (int i = 0; i < k_; ++i) parts.push_back(group_fc_[i](core::slice_rows(x, i, 1)));
    return core::slice_cols(core::concat_cols(parts), 0, num_classes_);
  }

  int num_queries() const { return k_; }
  int group_factor() const { return g_; }
  int decoder_dim() const { return dd_; }

  void collect(const std::string& prefix, core::ParamList& out) const {
    out.add(prefix + ".queries", queries_);
    if (has_in_proj_) in_proj_.collect(prefix + ".inproj", out);
    cross_.collect(prefix + ".cross", out);
    ln1_.collect(prefix + ".ln1", out);
    ln2_.collect(prefix + ".ln2", out);
    fc1_.collect(prefix + ".fc1", out);
    fc2_.collect(prefix + ".fc2", out);
    for (int i = 0; i < k_; ++i) group_fc_[i].collect(prefix + ".group" + std::to_string(i), out);
  }

 private:
  int num_classes_ = 0, k_ = 0, g_ = 0, dd_ = 0;
  bool has_in_proj_ = false;
  Tensor queries_;
  core::Linear in_proj_;
  core::MultiheadAttention cross_;
  core::LayerNorm ln1_, ln2_;
  core::Linear fc1_, fc2_;
  std::vector<core::Linear> group_fc_;
};

inline Tensor project_and_normalize(const Tensor& v, const core::Linear& projector) {
  return core::normalize_rows(projector(v));
}

// ---------------------------------------------------------------------------

struct Model {
  EncoderConfig ecfg;
  RecognitionHeadConfig hcfg;
  TagLexicon lexicon;
  TextTokenizer tokenizer;

  ImageEncoder image_encoder;
  TextEncoder text_encoder;
  RecognitionHead head;
  core::Linear proj_v, proj_w;
  Tensor log_temperature;

  static Model create(EncoderConfig ecfg, const RecognitionHeadConfig& hcfg, TagLexicon lexicon,
                      TextTokenizer tokenizer, double temperature_init, std::uint64_t seed) {
    ecfg.text_vocab = tokenizer.vocab_size();
    ecfg.validate();
    if (temperature_init <= 0.0) throw std::invalid_argument("temperature_init must be > 0");
    Model m;
    m.ecfg = ecfg;
    m.hcfg = hcfg;
    m.lexicon = std::move(lexicon);
    m.tokenizer = std::move(tokenizer);
    std::mt19937_64 rng(core::derive_seed(seed, 0xA11CEULL, 0));
    m.image_encoder = ImageEncoder(ecfg, rng);
    m.text_encoder = TextEncoder(ecfg, rng);
    m.head = RecognitionHead(hcfg, ecfg.width, m.lexicon.num_classes(), rng);
    m.proj_v = core::Linear(ecfg.width, ecfg.proj_dim, rng);
    m.proj_w = core::Linear(ecfg.width, ecfg.proj_dim, rng);
    m.log_temperature = Tensor::leaf(Matrix::Constant(1, 1, std::log(temperature_init)), true);
    return m;
  }

  core::ParamList parameters() const {
    core::ParamList out;
    image_encoder.collect("image", out);
    text_encoder.collect("text", out);
    head.collect("head", out);
    proj_v.collect("proj_v", out);
    proj_w.collect("proj_w", out);
    out.add("log_temperature", log_temperature);
    return out;
  }

  std::vector<Tensor> trainable_parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : parameters().items)
      if (t.requires_grad()) out.push_back(t);
    return out;
  }

  EncoderOutput encode_image(const Image& img) const { return image_encoder.encode(img); }
  Tensor encode_text_ids(const std::vector<int>& ids) const { return text_encoder.encode(ids); }
  Tensor encode_text(const std::string& text) const {
    return text_encoder.encode(tokenizer.encode(text, ecfg.text_max_len).ids);
  }
  Tensor tag_logits(const Tensor& spatial) const { return head.logits(spatial); }
  Tensor image_embedding(const EncoderOutput& enc) const {
    return project_and_normalize(enc.global, proj_v);
  }
  Tensor text_embedding(const Tensor& text_global) const {
    return project_and_normalize(text_global, proj_w);
  }

  double temperature(double lo = 1e-3, double hi = 10.0) const {
    return std::min(std::max(std::exp(log_temperature.value()(0, 0)), lo), hi);
  }
};

}  // namespace idea
