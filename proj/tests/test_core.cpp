#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "idea/core/nn.hpp"
#include "idea/core/optim.hpp"
#include "idea/core/tensor.hpp"
#include "oracles.hpp"

using idea::core::Matrix;
using idea::core::Tensor;
namespace core = idea::core;

namespace {

// runs f as a graph-returning functor and checks d(sum f)/dx against FD
void check_op_grad(const std::function<Tensor(const Tensor&)>& f, const Matrix& x0,
                   double tol = 1e-4) {
  Tensor x = Tensor::leaf(x0, true);
  Tensor y = core::sum_all(f(x));
  core::backward(y);
  auto scalar_f = [&](const Matrix& m) {
    Tensor xi = Tensor::leaf(m, false);
    return core::sum_all(f(xi)).item();
  };
  auto res = oracles::gradcheck(scalar_f, x0, x.grad(), 1e-4, tol);
  INFO(res.detail);
  CHECK(res.ok);
}

Matrix randm(std::mt19937_64& rng, long r, long c) {
  return idea::core::random_normal(rng, r, c, 1.0);
}

}  // namespace

TEST_CASE("elementwise and matmul gradients match finite differences", "[core]") {
  std::mt19937_64 rng(42);
  Matrix a = randm(rng, 3, 4);
  Matrix w0 = randm(rng, 4, 5);

  Matrix lw = randm(rng, 2, 3);
  check_op_grad([&](const Tensor& x) { return core::matmul(x, Tensor::constant(w0)); }, a);
  check_op_grad([&](const Tensor& x) { return core::matmul(Tensor::constant(lw), x); }, a);
  check_op_grad([&](const Tensor& x) { return core::mul(x, Tensor::constant(a.array().abs().matrix() + Matrix::Ones(3, 4))); }, a);
  check_op_grad([&](const Tensor& x) { return core::gelu(x); }, a);
  check_op_grad([&](const Tensor& x) { return core::sigmoid(x); }, a);
  check_op_grad([&](const Tensor& x) { return core::exp_elem(core::scale(x, 0.3)); }, a);
  check_op_grad([&](const Tensor& x) { return core::transpose(x); }, a);
  check_op_grad([&](const Tensor& x) { return core::add_scalar(core::scale(x, -2.0), 1.5); }, a);
}

TEST_CASE("softmax, log-softmax, layernorm, normalize gradients", "[core]") {
  std::mt19937_64 rng(7);
  Matrix a = randm(rng, 4, 6);

  check_op_grad([&](const Tensor& x) { return core::softmax_rows(x); }, a);
  const Matrix mult = randm(rng, 4, 6);
  check_op_grad(
      [&](const Tensor& x) { return core::mul_const(core::log_softmax_rows(x), mult); }, a);
  Matrix g0 = randm(rng, 1, 6), b0 = randm(rng, 1, 6);
  check_op_grad(
      [&](const Tensor& x) {
        return core::layernorm_rows(x, Tensor::constant(g0), Tensor::constant(b0));
      },
      a, 5e-4);
  check_op_grad([&](const Tensor& x) { return core::normalize_rows(x); }, a);

  SECTION("layernorm gain/shift gradients") {
    Tensor x = Tensor::constant(a);
    auto f = [&](const Matrix& m) {
      Tensor gi = Tensor::leaf(m, false);
      return core::sum_all(core::sigmoid(core::layernorm_rows(x, gi, Tensor::constant(b0))))
          .item();
    };
    Tensor g = Tensor::leaf(g0, true);
    core::backward(
        core::sum_all(core::sigmoid(core::layernorm_rows(x, g, Tensor::constant(b0)))));
    auto res = oracles::gradcheck(f, g0, g.grad(), 1e-4, 1e-4);
    INFO(res.detail);
    CHECK(res.ok);
  }
}

TEST_CASE("slicing, concatenation, stacking route gradients correctly", "[core]") {
  std::mt19937_64 rng(11);
  Matrix a = randm(rng, 4, 8);

  check_op_grad([&](const Tensor& x) { return core::slice_cols(x, 2, 3); }, a);
  check_op_grad([&](const Tensor& x) { return core::slice_rows(x, 1, 2); }, a);
  const Matrix proj = randm(rng, 8, 2);
  check_op_grad(
      [&](const Tensor& x) {
        std::vector<Tensor> parts{core::slice_cols(x, 0, 4), core::slice_cols(x, 4, 4)};
        return core::matmul(core::concat_cols(parts), Tensor::constant(proj));
      },
      a);
  check_op_grad(
      [&](const Tensor& x) {
        std::vector<Tensor> parts{core::slice_rows(x, 0, 2), core::slice_rows(x, 2, 2)};
        return core::stack_rows(parts);
      },
      a);
}

TEST_CASE("embedding lookup scatters gradients to used rows only", "[core]") {
  Matrix table0(5, 3);
  table0 << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15;
  Tensor table = Tensor::leaf(table0, true);
  std::vector<int> ids{1, 3, 1};
  Tensor out = core::embed_rows(table, ids);
  REQUIRE(out.rows() == 3);
  CHECK(out.value()(0, 0) == 4);
  core::backward(core::sum_all(out));
  CHECK(table.grad()(1, 0) == 2.0);  // used twice
  CHECK(table.grad()(3, 0) == 1.0);
  CHECK(table.grad()(0, 0) == 0.0);
  CHECK_THROWS_AS(core::embed_rows(table, {7}), std::out_of_range);
}

TEST_CASE("attention block gradients and shapes", "[core]") {
  std::mt19937_64 rng(3);
  core::MultiheadAttention attn(8, 2, rng);
  Matrix x0 = randm(rng, 5, 8);

  check_op_grad([&](const Tensor& x) { return attn(x, x); }, x0, 5e-4);

  SECTION("key mask removes masked positions") {
    Matrix mask(1, 5);
    mask << 0, 0, 0, -1e30, -1e30;
    Tensor xa = Tensor::constant(x0);
    Matrix garbage = x0;
    garbage.row(3).setConstant(99.0);
    garbage.row(4).setConstant(-99.0);
    Tensor xb = Tensor::constant(garbage);
    // queries from row 0..2 must be unaffected by masked key rows
    Tensor ya = attn(core::slice_rows(xa, 0, 3), xa, Tensor::constant(mask));
    Tensor yb = attn(core::slice_rows(xb, 0, 3), xb, Tensor::constant(mask));
    CHECK((ya.value() - yb.value()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("transformer block gradcheck", "[core]") {
  std::mt19937_64 rng(5);
  core::TransformerBlock block(8, 2, rng);
  Matrix x0 = randm(rng, 4, 8);
  check_op_grad([&](const Tensor& x) { return block(x); }, x0, 5e-4);

  SECTION("every parameter receives gradient") {
    core::ParamList params;
    block.collect("block", params);
    Tensor x = Tensor::constant(x0);
    Tensor loss = core::sum_all(core::sigmoid(block(x)));
    core::backward(loss);
    for (auto& [name, t] : params.items) {
      INFO(name);
      CHECK(t.grad().cwiseAbs().maxCoeff() > 0.0);
    }
  }
}

TEST_CASE("adamw decreases a quadratic and decays weights", "[core]") {
  Tensor p = Tensor::leaf(Matrix::Constant(1, 1, 5.0), true);
  core::AdamW opt({p}, {.beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.0});
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    Tensor loss = core::mul(p, p);
    core::backward(loss);
    opt.step(0.1);
  }
  CHECK(std::abs(p.value()(0, 0)) < 0.1);

  SECTION("decoupled decay shrinks parameters with zero gradient") {
    Tensor q = Tensor::leaf(Matrix::Constant(1, 1, 1.0), true);
    core::AdamW opt2({q}, {.beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.5});
    opt2.zero_grad();
    opt2.step(0.1);
    CHECK(q.value()(0, 0) < 1.0);
  }
}

TEST_CASE("lr schedule warms up then decays to zero", "[core]") {
  double peak = core::lr_schedule(99, 1000, 100, 1e-3);
  CHECK(peak == Catch::Approx(1e-3));
  CHECK(core::lr_schedule(0, 1000, 100, 1e-3) == Catch::Approx(1e-5));
  CHECK(core::lr_schedule(999, 1000, 100, 1e-3) < 2e-5);
  CHECK(core::lr_schedule(550, 1000, 100, 1e-3) == Catch::Approx(0.5e-3).margin(1e-5));
}
