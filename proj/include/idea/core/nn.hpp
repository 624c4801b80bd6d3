#pragma once

// Transformer building blocks on top of the autograd tensor.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "idea/core/rng.hpp"
#include "idea/core/tensor.hpp"

namespace idea::core {

// ordered name -> tensor registry; collection order is the checkpoint order
struct ParamList {
  std::vector<std::pair<std::string, Tensor>> items;
  void add(const std::string& name, const Tensor& t) { items.emplace_back(name, t); }
};

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out

  Linear() = default;
  // init_std 0 selects fan-in scaling, 1/sqrt(in)
  Linear(long in, long out, std::mt19937_64& rng, double init_std = 0.0) {
    double std = init_std > 0.0 ? init_std : 1.0 / std::sqrt(static_cast<double>(in));
    w = Tensor::leaf(random_normal(rng, in, out, std), true);
    b = Tensor::leaf(Matrix::Zero(1, out), true);
  }

  Tensor operator()(const Tensor& x) const { return add_rowvec(matmul(x, w), b); }

  void collect(const std::string& prefix, ParamList& out) const {
    out.add(prefix + ".w", w);
    out.add(prefix + ".b", b);
  }
};

struct LayerNorm {
  Tensor gamma, beta;

  LayerNorm() = default;
  explicit LayerNorm(long dim) {
    gamma = Tensor::leaf(Matrix::Ones(1, dim), true);
    beta = Tensor::leaf(Matrix::Zero(1, dim), true);
  }

  Tensor operator()(const Tensor& x) const { return layernorm_rows(x, gamma, beta); }

  void collect(const std::string& prefix, ParamList& out) const {
    out.add(prefix + ".gamma", gamma);
    out.add(prefix + ".beta", beta);
  }
};

// Multi-head scaled dot-product attention. Queries may differ from keys/values
// (cross-attention). key_mask, when defined, is a 1xTk additive row applied to
// every score row (0 for visible keys, large negative for masked ones).
struct MultiheadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;
  long dim = 0;

  MultiheadAttention() = default;
  MultiheadAttention(long model_dim, int num_heads, std::mt19937_64& rng)
      : wq(model_dim, model_dim, rng),
        wk(model_dim, model_dim, rng),
        wv(model_dim, model_dim, rng),
        wo(model_dim, model_dim, rng),
        heads(num_heads),
        dim(model_dim) {
    if (model_dim % num_heads != 0)
      throw std::invalid_argument("attention: width not divisible by heads");
  }

  Tensor operator()(const Tensor& q_in, const Tensor& kv_in, const Tensor& key_mask = {}) const {
    Tensor q = wq(q_in), k = wk(kv_in), v = wv(kv_in);
    long hd = dim / heads;
    double scl = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      Tensor qh = slice_cols(q, h * hd, hd);
      Tensor kh = slice_cols(k, h * hd, hd);
      Tensor vh = slice_cols(v, h * hd, hd);
      Tensor scores = scale(matmul(qh, transpose(kh)), scl);
      if (key_mask.defined()) scores = add_rowvec(scores, key_mask);
      outs.push_back(matmul(softmax_rows(scores), vh));
    }
    return wo(concat_cols(outs));
  }

  void collect(const std::string& prefix, ParamList& out) const {
    wq.collect(prefix + ".wq", out);
    wk.collect(prefix + ".wk", out);
    wv.collect(prefix + ".wv", out);
    wo.collect(prefix + ".wo", out);
  }
};

// pre-norm transformer encoder block
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiheadAttention attn;
  Linear fc1, fc2;

  TransformerBlock() = default;
  TransformerBlock(long dim, int heads, std::mt19937_64& rng, long mlp_ratio = 4)
      : ln1(dim), ln2(dim), attn(dim, heads, rng),
        fc1(dim, dim * mlp_ratio, rng), fc2(dim * mlp_ratio, dim, rng) {}

  Tensor operator()(const Tensor& x, const Tensor& key_mask = {}) const {
    Tensor h = ln1(x);
    Tensor y = add(x, attn(h, h, key_mask));
    return add(y, fc2(gelu(fc1(ln2(y)))));
  }

  void collect(const std::string& prefix, ParamList& out) const {
    ln1.collect(prefix + ".ln1", out);
    attn.collect(prefix + ".attn", out);
    ln2.collect(prefix + ".ln2", out);
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
  }
};

}  // namespace idea::core
