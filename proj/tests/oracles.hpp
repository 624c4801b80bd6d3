#pragma once

// Independent reference implementations used by the tests. These stay
// deliberately naive (brute force, finite differences) and must not call into
// the code paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// finite-difference gradient check

struct GradCheckResult {
  double max_err = 0.0;
  bool ok = true;
  std::string detail;
};

// Central differences with step h on every coordinate of x. Error metric is
// |analytic - fd| <= tol * max(1, |analytic|, |fd|).
inline GradCheckResult gradcheck(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                 const Matrix& analytic_grad, double h = 1e-3,
                                 double tol = 1e-4) {
  GradCheckResult res;
  for (long i = 0; i < x.rows(); ++i) {
    for (long j = 0; j < x.cols(); ++j) {
      Matrix xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      double fd = (f(xp) - f(xm)) / (2.0 * h);
      double an = analytic_grad(i, j);
      double err = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      if (err > res.max_err) res.max_err = err;
      if (err > tol && res.ok) {
        res.ok = false;
        std::ostringstream os;
        os << "grad mismatch at (" << i << "," << j << "): analytic=" << an << " fd=" << fd;
        res.detail = os.str();
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// reference InfoNCE (symmetric cross-entropy with diagonal targets)

inline double reference_infonce(const Matrix& s, double temperature) {
  auto row_ce = [&](const Matrix& m) {
    double total = 0.0;
    for (long i = 0; i < m.rows(); ++i) {
      double mx = -1e300;
      for (long j = 0; j < m.cols(); ++j) mx = std::max(mx, m(i, j) / temperature);
      double lse = 0.0;
      for (long j = 0; j < m.cols(); ++j) lse += std::exp(m(i, j) / temperature - mx);
      total += -(m(i, i) / temperature - mx - std::log(lse));
    }
    return total / static_cast<double>(m.rows());
  };
  Matrix st = s.transpose();
  return 0.5 * (row_ce(s) + row_ce(st));
}

// ---------------------------------------------------------------------------
// brute-force confusion-matrix metrics (per class)

struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion_for_class(const Matrix& probs, const Matrix& gt, long c,
                                     double threshold) {
  Confusion k;
  for (long i = 0; i < probs.rows(); ++i) {
    bool pred = probs(i, c) > threshold;
    bool pos = gt(i, c) > 0.5;
    if (pred && pos) ++k.tp;
    else if (pred && !pos) ++k.fp;
    else if (!pred && pos) ++k.fn;
    else ++k.tn;
  }
  return k;
}

// ---------------------------------------------------------------------------
// brute-force n-gram tag matching oracle
//
// Matches every lexicon entry as a contiguous n-gram over the lemma sequence,
// then clears single-word entries whose every occurrence lies inside some
// matched compound span.

inline std::vector<int> ngram_tag_oracle(const std::vector<std::string>& lemmas,
                                         const std::vector<std::vector<std::string>>& entry_tokens) {
  const std::size_t n = lemmas.size();
  std::vector<int> bits(entry_tokens.size(), 0);
  std::vector<char> covered(n, 0);

  // pass 1: compounds
  for (std::size_t e = 0; e < entry_tokens.size(); ++e) {
    const auto& toks = entry_tokens[e];
    if (toks.size() < 2) continue;
    for (std::size_t start = 0; start + toks.size() <= n; ++start) {
      bool match = true;
      for (std::size_t k = 0; k < toks.size(); ++k)
        if (lemmas[start + k] != toks[k]) { match = false; break; }
      if (match) {
        bits[e] = 1;
        for (std::size_t k = 0; k < toks.size(); ++k) covered[start + k] = 1;
      }
    }
  }
  // pass 2: single words outside covered spans
  for (std::size_t e = 0; e < entry_tokens.size(); ++e) {
    const auto& toks = entry_tokens[e];
    if (toks.size() != 1) continue;
    for (std::size_t i = 0; i < n; ++i)
      if (!covered[i] && lemmas[i] == toks[0]) { bits[e] = 1; break; }
  }
  return bits;
}

}  // namespace oracles
