#pragma once

// AdamW with decoupled weight decay, plus a warmup + cosine learning-rate
// schedule.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "idea/core/nn.hpp"
#include "idea/core/tensor.hpp"

namespace idea::core {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class AdamW {
 public:
  AdamW() = default;
  AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const Tensor& p : params_) {
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Matrix& g = params_[i].grad();
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      Matrix update =
          ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + cfg_.eps)).matrix();
      params_[i].value() -= lr * (update + cfg_.weight_decay * params_[i].value());
    }
  }

  long step_count() const { return t_; }

  // moment access for checkpointing
  std::size_t size() const { return params_.size(); }
  Matrix& moment1(std::size_t i) { return m_[i]; }
  Matrix& moment2(std::size_t i) { return v_[i]; }
  void set_step_count(long t) { t_ = t; }

 private:
  std::vector<Tensor> params_;
  AdamWConfig cfg_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

// linear warmup to max_lr, then cosine decay to zero over the remaining steps
inline double lr_schedule(long step, long total_steps, long warmup_steps, double max_lr) {
  if (warmup_steps > 0 && step < warmup_steps)
    return max_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return max_lr;
  double progress = static_cast<double>(step - warmup_steps) /
                    static_cast<double>(total_steps - warmup_steps);
  if (progress > 1.0) progress = 1.0;
  return max_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace idea::core
