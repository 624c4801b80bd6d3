#pragma once

// Reverse-mode automatic differentiation over Eigen double matrices.
// Each op builds a node in a dynamic graph; backward() walks the graph in
// reverse topological order and accumulates gradients into the leaves.

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace idea::core {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

inline void accumulate_grad(Node& n, const Matrix& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Matrix value, bool trainable = true) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->value = std::move(value);
    t.node_->requires_grad = trainable;
    if (trainable) t.node_->grad = Matrix::Zero(t.node_->value.rows(), t.node_->value.cols());
    return t;
  }

  static Tensor constant(Matrix value) { return leaf(std::move(value), false); }

  static Tensor scalar(double v, bool trainable = false) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return leaf(std::move(m), trainable);
  }

  bool defined() const { return node_ != nullptr; }
  long rows() const { return node_->value.rows(); }
  long cols() const { return node_->value.cols(); }

  const Matrix& value() const { return node_->value; }
  Matrix& value() { return node_->value; }
  double item() const {
    if (node_->value.size() != 1) throw std::logic_error("item() on non-scalar tensor");
    return node_->value(0, 0);
  }

  bool requires_grad() const { return node_->requires_grad; }
  const Matrix& grad() const {
    if (node_->grad.size() == 0)
      node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
    return node_->grad;
  }
  Matrix& grad() {
    if (node_->grad.size() == 0)
      node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
    return node_->grad;
  }
  void zero_grad() { node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols()); }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  // grad is lazily allocated; mutable so grad() works on const tensors
  mutable std::shared_ptr<Node> node_;
};

namespace detail {

template <typename F>
Tensor make_op(Matrix value, std::vector<Tensor> parents, F&& backward_fn) {
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node>> pnodes;
  pnodes.reserve(parents.size());
  for (const Tensor& p : parents) {
    needs_grad = needs_grad || p.node()->requires_grad;
    pnodes.push_back(p.node());
  }
  Tensor t = Tensor::leaf(std::move(value), false);
  t.node()->requires_grad = needs_grad;
  if (needs_grad) {
    t.node()->parents = std::move(pnodes);
    t.node()->backward = std::forward<F>(backward_fn);
  }
  return t;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// value-level helpers (shared by ops and by non-autograd callers)

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix softmax_rows_value(const Matrix& s) {
  Matrix p(s.rows(), s.cols());
  for (long i = 0; i < s.rows(); ++i) {
    double mx = s.row(i).maxCoeff();
    Eigen::RowVectorXd e = (s.row(i).array() - mx).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

inline Matrix log_softmax_rows_value(const Matrix& s) {
  Matrix p(s.rows(), s.cols());
  for (long i = 0; i < s.rows(); ++i) {
    double mx = s.row(i).maxCoeff();
    double lse = std::log((s.row(i).array() - mx).exp().sum());
    p.row(i) = s.row(i).array() - mx - lse;
  }
  return p;
}

// ---------------------------------------------------------------------------
// ops

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  auto pa = a.node(), pb = b.node();
  return detail::make_op(a.value() + b.value(), {a, b}, [pa, pb](Node& self) {
    accumulate_grad(*pa, self.grad);
    accumulate_grad(*pb, self.grad);
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  auto pa = a.node(), pb = b.node();
  return detail::make_op(a.value() - b.value(), {a, b}, [pa, pb](Node& self) {
    accumulate_grad(*pa, self.grad);
    accumulate_grad(*pb, -self.grad);
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  auto pa = a.node(), pb = b.node();
  return detail::make_op(a.value().cwiseProduct(b.value()), {a, b}, [pa, pb](Node& self) {
    accumulate_grad(*pa, self.grad.cwiseProduct(pb->value));
    accumulate_grad(*pb, self.grad.cwiseProduct(pa->value));
  });
}

// broadcast a 1xN row over every row of a
inline Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: row must be 1x" + std::to_string(a.cols()));
  auto pa = a.node(), pr = row.node();
  Matrix v = a.value();
  v.rowwise() += Eigen::RowVectorXd(row.value().row(0));
  return detail::make_op(std::move(v), {a, row}, [pa, pr](Node& self) {
    accumulate_grad(*pa, self.grad);
    accumulate_grad(*pr, self.grad.colwise().sum());
  });
}

inline Tensor scale(const Tensor& a, double s) {
  auto pa = a.node();
  return detail::make_op(a.value() * s, {a},
                         [pa, s](Node& self) { accumulate_grad(*pa, self.grad * s); });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  auto pa = a.node();
  return detail::make_op((a.value().array() + s).matrix(), {a},
                         [pa](Node& self) { accumulate_grad(*pa, self.grad); });
}

// elementwise product with a fixed matrix
inline Tensor mul_const(const Tensor& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols())
    throw std::invalid_argument("mul_const: shape mismatch");
  auto pa = a.node();
  return detail::make_op(a.value().cwiseProduct(c), {a}, [pa, c](Node& self) {
    accumulate_grad(*pa, self.grad.cwiseProduct(c));
  });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dims " + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()));
  auto pa = a.node(), pb = b.node();
  return detail::make_op(a.value() * b.value(), {a, b}, [pa, pb](Node& self) {
    accumulate_grad(*pa, self.grad * pb->value.transpose());
    accumulate_grad(*pb, pa->value.transpose() * self.grad);
  });
}

inline Tensor transpose(const Tensor& a) {
  auto pa = a.node();
  return detail::make_op(a.value().transpose(), {a}, [pa](Node& self) {
    accumulate_grad(*pa, self.grad.transpose());
  });
}

inline Tensor slice_rows(const Tensor& a, long i0, long n) {
  if (i0 < 0 || n < 0 || i0 + n > a.rows()) throw std::invalid_argument("slice_rows: out of range");
  auto pa = a.node();
  return detail::make_op(a.value().middleRows(i0, n), {a}, [pa, i0, n](Node& self) {
    if (!pa->requires_grad) return;
    if (pa->grad.size() == 0) pa->grad = Matrix::Zero(pa->value.rows(), pa->value.cols());
    pa->grad.middleRows(i0, n) += self.grad;
  });
}

inline Tensor slice_cols(const Tensor& a, long j0, long n) {
  if (j0 < 0 || n < 0 || j0 + n > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  auto pa = a.node();
  return detail::make_op(a.value().middleCols(j0, n), {a}, [pa, j0, n](Node& self) {
    if (!pa->requires_grad) return;
    if (pa->grad.size() == 0) pa->grad = Matrix::Zero(pa->value.rows(), pa->value.cols());
    pa->grad.middleCols(j0, n) += self.grad;
  });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  long rows = parts[0].rows(), cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  std::vector<long> offsets;
  long off = 0;
  for (const Tensor& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  std::vector<std::shared_ptr<Node>> pn;
  for (const Tensor& p : parts) pn.push_back(p.node());
  return detail::make_op(std::move(v), parts, [pn, offsets](Node& self) {
    for (std::size_t k = 0; k < pn.size(); ++k)
      accumulate_grad(*pn[k], self.grad.middleCols(offsets[k], pn[k]->value.cols()));
  });
}

inline Tensor stack_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack_rows: empty");
  long cols = parts[0].cols(), rows = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("stack_rows: col mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  std::vector<long> offsets;
  long off = 0;
  for (const Tensor& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  std::vector<std::shared_ptr<Node>> pn;
  for (const Tensor& p : parts) pn.push_back(p.node());
  return detail::make_op(std::move(v), parts, [pn, offsets](Node& self) {
    for (std::size_t k = 0; k < pn.size(); ++k)
      accumulate_grad(*pn[k], self.grad.middleRows(offsets[k], pn[k]->value.rows()));
  });
}

inline Tensor softmax_rows(const Tensor& a) {
  auto pa = a.node();
  Matrix p = softmax_rows_value(a.value());
  return detail::make_op(p, {a}, [pa, p](Node& self) {
    Matrix g(p.rows(), p.cols());
    for (long i = 0; i < p.rows(); ++i) {
      double dot = self.grad.row(i).cwiseProduct(p.row(i)).sum();
      g.row(i) = (p.row(i).array() * (self.grad.row(i).array() - dot)).matrix();
    }
    accumulate_grad(*pa, g);
  });
}

inline Tensor log_softmax_rows(const Tensor& a) {
  auto pa = a.node();
  Matrix lsm = log_softmax_rows_value(a.value());
  return detail::make_op(lsm, {a}, [pa, lsm](Node& self) {
    Matrix g(lsm.rows(), lsm.cols());
    for (long i = 0; i < lsm.rows(); ++i) {
      double rowsum = self.grad.row(i).sum();
      g.row(i) = self.grad.row(i) - lsm.row(i).array().exp().matrix() * rowsum;
    }
    accumulate_grad(*pa, g);
  });
}

// rowwise layer norm with learnable gain/shift (1xD each)
inline Tensor layernorm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                             double eps = 1e-5) {
  long d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d)
    throw std::invalid_argument("layernorm_rows: gamma/beta must be 1xD");
  auto px = x.node(), pg = gamma.node(), pb = beta.node();
  Matrix xhat(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (long i = 0; i < x.rows(); ++i) {
    double mean = x.value().row(i).mean();
    double var = (x.value().row(i).array() - mean).square().mean();
    double istd = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mean) * istd;
    inv_std(i) = istd;
  }
  Matrix v = xhat.cwiseProduct(gamma.value().replicate(xhat.rows(), 1));
  v.rowwise() += Eigen::RowVectorXd(beta.value().row(0));
  return detail::make_op(std::move(v), {x, gamma, beta}, [px, pg, pb, xhat, inv_std](Node& self) {
    const long d = xhat.cols();
    accumulate_grad(*pg, self.grad.cwiseProduct(xhat).colwise().sum());
    accumulate_grad(*pb, self.grad.colwise().sum());
    if (!px->requires_grad) return;
    Matrix gx(xhat.rows(), d);
    for (long i = 0; i < xhat.rows(); ++i) {
      Eigen::RowVectorXd dxhat = self.grad.row(i).cwiseProduct(pg->value.row(0));
      double m1 = dxhat.mean();
      double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
      gx.row(i) = (inv_std(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2)).matrix();
    }
    accumulate_grad(*px, gx);
  });
}

inline Tensor gelu(const Tensor& a) {
  auto pa = a.node();
  const double inv_sqrt2 = 0.7071067811865475244;
  const double inv_sqrt2pi = 0.3989422804014326779;
  Matrix v = a.value().unaryExpr(
      [&](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  return detail::make_op(std::move(v), {a}, [pa, inv_sqrt2, inv_sqrt2pi](Node& self) {
    Matrix d = pa->value.unaryExpr([&](double x) {
      double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      return cdf + x * pdf;
    });
    accumulate_grad(*pa, self.grad.cwiseProduct(d));
  });
}

inline Tensor sigmoid(const Tensor& a) {
  auto pa = a.node();
  Matrix p = a.value().unaryExpr([](double x) { return sigmoid_value(x); });
  return detail::make_op(p, {a}, [pa, p](Node& self) {
    accumulate_grad(*pa, self.grad.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix())));
  });
}

inline Tensor log_elem(const Tensor& a) {
  auto pa = a.node();
  return detail::make_op(a.value().array().log().matrix(), {a}, [pa](Node& self) {
    accumulate_grad(*pa, self.grad.cwiseQuotient(pa->value));
  });
}

inline Tensor exp_elem(const Tensor& a) {
  auto pa = a.node();
  Matrix v = a.value().array().exp().matrix();
  return detail::make_op(v, {a}, [pa, v](Node& self) {
    accumulate_grad(*pa, self.grad.cwiseProduct(v));
  });
}

// gradient passes through where lo < value < hi, zero elsewhere
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  auto pa = a.node();
  Matrix v = a.value().unaryExpr([lo, hi](double x) { return std::min(std::max(x, lo), hi); });
  return detail::make_op(std::move(v), {a}, [pa, lo, hi](Node& self) {
    Matrix mask = pa->value.unaryExpr(
        [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
    accumulate_grad(*pa, self.grad.cwiseProduct(mask));
  });
}

// multiply every element of a by a learnable 1x1 scalar
inline Tensor mul_by_scalar(const Tensor& a, const Tensor& s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("mul_by_scalar: s must be 1x1");
  auto pa = a.node(), ps = s.node();
  return detail::make_op(a.value() * s.value()(0, 0), {a, s}, [pa, ps](Node& self) {
    accumulate_grad(*pa, self.grad * ps->value(0, 0));
    Matrix gs(1, 1);
    gs(0, 0) = self.grad.cwiseProduct(pa->value).sum();
    accumulate_grad(*ps, gs);
  });
}

inline Tensor sum_all(const Tensor& a) {
  auto pa = a.node();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return detail::make_op(std::move(v), {a}, [pa](Node& self) {
    accumulate_grad(*pa, Matrix::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0)));
  });
}

// L2-normalize each row; rows with near-zero norm are rejected
inline Tensor normalize_rows(const Tensor& a, double min_norm = 1e-12) {
  auto pa = a.node();
  Matrix v(a.rows(), a.cols());
  Eigen::VectorXd inv_norm(a.rows());
  for (long i = 0; i < a.rows(); ++i) {
    double n = a.value().row(i).norm();
    if (n < min_norm) throw std::runtime_error("degenerate embedding");
    inv_norm(i) = 1.0 / n;
    v.row(i) = a.value().row(i) * inv_norm(i);
  }
  return detail::make_op(v, {a}, [pa, v, inv_norm](Node& self) {
    Matrix g(v.rows(), v.cols());
    for (long i = 0; i < v.rows(); ++i) {
      double dot = self.grad.row(i).cwiseProduct(v.row(i)).sum();
      g.row(i) = (inv_norm(i) * (self.grad.row(i).array() - v.row(i).array() * dot)).matrix();
    }
    accumulate_grad(*pa, g);
  });
}

// gather rows of an embedding table; gradients scatter-add back
inline Tensor embed_rows(const Tensor& table, const std::vector<int>& ids) {
  auto pt = table.node();
  Matrix v(static_cast<long>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows())
      throw std::out_of_range("embed_rows: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(table.rows()));
    v.row(static_cast<long>(i)) = table.value().row(ids[i]);
  }
  return detail::make_op(std::move(v), {table}, [pt, ids](Node& self) {
    if (!pt->requires_grad) return;
    if (pt->grad.size() == 0) pt->grad = Matrix::Zero(pt->value.rows(), pt->value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i)
      pt->grad.row(ids[i]) += self.grad.row(static_cast<long>(i));
  });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// ---------------------------------------------------------------------------

inline void backward(const Tensor& root) {
  if (root.value().size() != 1) throw std::logic_error("backward: root must be scalar");
  if (!root.node()->requires_grad) return;

  // iterative post-order DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->grad = Matrix::Constant(1, 1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

}  // namespace idea::core
