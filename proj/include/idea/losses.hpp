#pragma once

// Training objectives: re-weighted multi-label loss with BCE or self-paced
// corrected terms, the KL-based image-text contrastive loss, and their sum.
//
// Graph-building variants (for training) and plain-value variants (for
// inspection and tests) share the same branch logic and constants.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "idea/core/tensor.hpp"
#include "idea/lexicon.hpp"
#include "idea/tagger.hpp"

namespace idea {

using core::Matrix;

inline constexpr double kProbEps = 1e-8;

struct Hyperparams {
  double tau = 0.6;
  int changing_epoch = 1;
  double temperature_init = 0.07;
  double temperature_min = 1e-3;
  double temperature_max = 10.0;
};

enum class BatchReduction { mean, sum };

// ---------------------------------------------------------------------------
// per-class probabilities and loss terms

inline Matrix sigmoid_probs(const Matrix& logits) {
  return logits.unaryExpr([](double x) { return core::sigmoid_value(x); });
}

inline double log_clamped(double p) { return std::log(std::min(std::max(p, kProbEps), 1.0)); }

// positive term log(p) where y=1, negative term log(1-p) where y=0; the outer
// sum of the multi-label loss carries the minus sign
inline Matrix bce_terms(const Matrix& p, const Matrix& y) {
  if (p.rows() != y.rows() || p.cols() != y.cols())
    throw std::invalid_argument("bce_terms: shape mismatch");
  Matrix terms(p.rows(), p.cols());
  for (long i = 0; i < p.rows(); ++i)
    for (long j = 0; j < p.cols(); ++j)
      terms(i, j) = y(i, j) > 0.5 ? log_clamped(p(i, j)) : log_clamped(1.0 - p(i, j));
  return terms;
}

struct SplcResult {
  Matrix terms;
  Matrix corrected;                      // targets after pseudo-positive promotion
  std::vector<std::uint8_t> pseudo_mask; // per sample: any pseudo positive added
  long pseudo_count = 0;                 // number of newly set bits
};

// Before the changing epoch this is exactly BCE. From the changing epoch on,
// a negative entry whose predicted probability exceeds tau switches to the
// positive-form term and its target bit is promoted to 1. The boundary
// p == tau stays on the negative branch.
inline SplcResult splc_correct(const Matrix& p, const Matrix& y, double tau, int epoch,
                               int changing_epoch) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("splc_correct: tau must be in (0,1)");
  if (p.rows() != y.rows() || p.cols() != y.cols())
    throw std::invalid_argument("splc_correct: shape mismatch");
  SplcResult r;
  r.corrected = y;
  r.pseudo_mask.assign(p.rows(), 0);
  const bool active = epoch >= changing_epoch;
  r.terms.resize(p.rows(), p.cols());
  for (long i = 0; i < p.rows(); ++i) {
    for (long j = 0; j < p.cols(); ++j) {
      if (y(i, j) > 0.5) {
        r.terms(i, j) = log_clamped(p(i, j));
      } else if (active && p(i, j) > tau) {
        r.terms(i, j) = log_clamped(p(i, j));
        r.corrected(i, j) = 1.0;
        r.pseudo_mask[i] = 1;
        ++r.pseudo_count;
      } else {
        r.terms(i, j) = log_clamped(1.0 - p(i, j));
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// multi-label loss

struct MLRLossReport {
  double loss = 0.0;
  std::vector<TagVector> corrected_targets;
  std::vector<std::uint8_t> pseudo_mask;
  long pseudo_count = 0;
};

struct MLRLossResult {
  core::Tensor loss;
  MLRLossReport report;
};

inline Matrix targets_to_matrix(const std::vector<TagVector>& targets) {
  if (targets.empty()) throw std::invalid_argument("targets empty");
  Matrix y(static_cast<long>(targets.size()), static_cast<long>(targets[0].bits.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].bits.size() != targets[0].bits.size())
      throw std::invalid_argument("targets ragged");
    for (std::size_t j = 0; j < targets[i].bits.size(); ++j)
      y(static_cast<long>(i), static_cast<long>(j)) = targets[i].bits[j];
  }
  return y;
}

// weighted per-class terms from splc_correct, summed over classes, reduced
// over the batch; the correction indicator is treated as a constant
inline MLRLossResult mlr_loss(const core::Tensor& logits, const std::vector<TagVector>& targets,
                              const ClassWeights& weights, const Hyperparams& hyper, int epoch,
                              BatchReduction reduction = BatchReduction::mean) {
  const long m = logits.rows(), c = logits.cols();
  if (c != weights.weights.size())
    throw std::invalid_argument("mlr_loss: logits have " + std::to_string(c) +
                                " classes but weights have " +
                                std::to_string(weights.weights.size()));
  Matrix y = targets_to_matrix(targets);
  if (y.rows() != m || y.cols() != c) throw std::invalid_argument("mlr_loss: target shape mismatch");

  Matrix p_val = sigmoid_probs(logits.value());
  SplcResult splc = splc_correct(p_val, y, hyper.tau, epoch, hyper.changing_epoch);

  core::Tensor p = core::sigmoid(logits);
  core::Tensor lp = core::log_elem(core::clamp(p, kProbEps, 1.0));
  core::Tensor ln = core::log_elem(core::clamp(core::add_scalar(core::scale(p, -1.0), 1.0),
                                               kProbEps, 1.0));
  Matrix w_rep = weights.weights.transpose().replicate(m, 1);
  Matrix pos_w = splc.corrected.cwiseProduct(w_rep);
  Matrix neg_w = (Matrix::Ones(m, c) - splc.corrected).cwiseProduct(w_rep);
  core::Tensor weighted = core::add(core::mul_const(lp, pos_w), core::mul_const(ln, neg_w));
  double denom = reduction == BatchReduction::mean ? static_cast<double>(m) : 1.0;
  core::Tensor loss = core::scale(core::sum_all(weighted), -1.0 / denom);

  MLRLossResult out;
  out.loss = loss;
  out.report.loss = loss.item();
  out.report.pseudo_mask = splc.pseudo_mask;
  out.report.pseudo_count = splc.pseudo_count;
  out.report.corrected_targets.reserve(targets.size());
  for (long i = 0; i < m; ++i) {
    TagVector t;
    t.bits.resize(c);
    for (long j = 0; j < c; ++j) t.bits[j] = splc.corrected(i, j) > 0.5 ? 1 : 0;
    t.source = splc.pseudo_mask[i] ? TagVector::Source::corrected : targets[i].source;
    out.report.corrected_targets.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// image-text contrastive loss

struct SimilarityMatrix {
  Matrix s_i2t;  // M x N raw cosine similarities
  Matrix s_t2i;  // transpose of s_i2t
  Matrix p_i2t, p_t2i;  // row softmax at the given temperature
  Matrix y_i2t, y_t2i;  // target row distributions
  double temperature = 1.0;
};

inline SimilarityMatrix itc_similarities(const Matrix& z_img, const Matrix& z_txt,
                                         double temperature) {
  if (temperature <= 0.0) throw std::invalid_argument("itc_similarities: temperature must be > 0");
  if (z_img.cols() != z_txt.cols())
    throw std::invalid_argument("itc_similarities: embedding dim mismatch");
  SimilarityMatrix sim;
  sim.temperature = temperature;
  sim.s_i2t = z_img * z_txt.transpose();
  sim.s_t2i = sim.s_i2t.transpose();
  sim.p_i2t = core::softmax_rows_value(sim.s_i2t / temperature);
  sim.p_t2i = core::softmax_rows_value(sim.s_t2i / temperature);
  if (z_img.rows() == z_txt.rows()) {
    sim.y_i2t = Matrix::Identity(z_img.rows(), z_txt.rows());
    sim.y_t2i = Matrix::Identity(z_txt.rows(), z_img.rows());
  }
  return sim;
}

namespace detail {

// mean over rows of KL(y_row || softmax(s_row / temperature)); 0 log 0 = 0
inline double kl_rows(const Matrix& y, const Matrix& s, double temperature) {
  Matrix lsm = core::log_softmax_rows_value(s / temperature);
  double total = 0.0;
  for (long i = 0; i < y.rows(); ++i) {
    double row = 0.0;
    for (long j = 0; j < y.cols(); ++j) {
      double yj = y(i, j);
      if (yj > 0.0) row += yj * (std::log(yj) - lsm(i, j));
    }
    total += row;
  }
  return total / static_cast<double>(y.rows());
}

inline double entropy_term(const Matrix& y) {
  double total = 0.0;
  for (long i = 0; i < y.rows(); ++i)
    for (long j = 0; j < y.cols(); ++j)
      if (y(i, j) > 0.0) total += y(i, j) * std::log(y(i, j));
  return total / static_cast<double>(y.rows());
}

}  // namespace detail

inline double itc_loss(const SimilarityMatrix& sim) {
  if (sim.y_i2t.size() == 0 || sim.y_t2i.size() == 0)
    throw std::invalid_argument("itc_loss: targets not set");
  return 0.5 * (detail::kl_rows(sim.y_i2t, sim.s_i2t, sim.temperature) +
                detail::kl_rows(sim.y_t2i, sim.s_t2i, sim.temperature));
}

// graph variant; log_temperature is a 1x1 leaf clamped in log space
inline core::Tensor itc_loss_graph(const core::Tensor& z_img, const core::Tensor& z_txt,
                                   const core::Tensor& log_temperature, const Matrix& y_i2t,
                                   const Matrix& y_t2i, double temperature_min = 1e-3,
                                   double temperature_max = 10.0) {
  core::Tensor lt = core::clamp(log_temperature, std::log(temperature_min),
                                std::log(temperature_max));
  core::Tensor inv_t = core::exp_elem(core::scale(lt, -1.0));
  core::Tensor s = core::matmul(z_img, core::transpose(z_txt));
  core::Tensor scaled = core::mul_by_scalar(s, inv_t);
  core::Tensor lsm_i2t = core::log_softmax_rows(scaled);
  core::Tensor lsm_t2i = core::log_softmax_rows(core::transpose(scaled));
  double m = static_cast<double>(y_i2t.rows());
  double n = static_cast<double>(y_t2i.rows());
  core::Tensor ce_i2t = core::scale(core::sum_all(core::mul_const(lsm_i2t, y_i2t)), -1.0 / m);
  core::Tensor ce_t2i = core::scale(core::sum_all(core::mul_const(lsm_t2i, y_t2i)), -1.0 / n);
  double h = detail::entropy_term(y_i2t) + detail::entropy_term(y_t2i);
  core::Tensor kl_sum = core::add_scalar(core::add(ce_i2t, ce_t2i), h);
  return core::scale(kl_sum, 0.5);
}

inline double total_loss(double mlr, double itc) { return mlr + itc; }

inline core::Tensor total_loss_graph(const core::Tensor& mlr, const core::Tensor& itc) {
  return core::add(mlr, itc);
}

}  // namespace idea
