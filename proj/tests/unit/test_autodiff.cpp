#include <cmath>
#include <random>
#include <string>

#include "ccert/autodiff.hpp"
#include "ccert/error.hpp"
#include "doctest.h"
#include "fd.hpp"

using namespace ccert;

namespace {

Tensor rnd(std::mt19937_64& g, Shape s, double lo = -2, double hi = 2) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = u(g);
  return t;
}

Var weighted_sum(Var v) {
  Tensor w(v.tape->value(v).shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.0 + 0.7 * static_cast<double>(i));
  return sum(mul(v, v.tape->constant(w)));
}

}  // namespace

TEST_CASE("forward op examples") {
  Tape t;
  const Var a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const Var b = t.constant(Tensor::matrix(2, 1, {1, 1}));
  CHECK(t.value(matmul(a, b)) == Tensor::matrix(2, 1, {3, 7}));
  CHECK(t.value(tanh(t.constant(Tensor::matrix(1, 1, {0.0})))).item() == 0.0);
  const Var c = t.constant(Tensor(Shape{3, 2}, 1.0));
  const Var d = t.constant(Tensor(Shape{3, 4}, 2.0));
  CHECK(t.value(concat_cols(c, d)).shape() == Shape{3, 6});
  CHECK(t.value(slice_cols(concat_cols(c, d), 2, 6)) == t.value(d));
  CHECK(t.value(mean_rows(t.constant(Tensor::matrix(2, 2, {1, 2, 3, 6})))) == Tensor::matrix(1, 2, {2, 4}));
  CHECK(t.value(exp_half(t.constant(Tensor::matrix(1, 1, {2.0})))).item() == doctest::Approx(std::exp(1.0)));
  CHECK(t.value(sum(c)).item() == 6.0);
  CHECK(t.value(mean(d)).item() == 2.0);
}

TEST_CASE("shape mismatches name both shapes") {
  Tape t;
  const Var a = t.constant(Tensor(Shape{2, 3}));
  const Var b = t.constant(Tensor(Shape{2, 3}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, t.constant(Tensor(Shape{3, 2}))), ShapeError);
  CHECK_THROWS_AS(bias_add(a, t.constant(Tensor(Shape{1, 2}))), ShapeError);
  CHECK_THROWS_AS(concat_cols(a, t.constant(Tensor(Shape{3, 1}))), ShapeError);
  CHECK_THROWS_AS(slice_cols(a, 2, 5), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("log_softmax_rows values, shift invariance, normalization") {
  Tape t;
  const auto z = t.value(log_softmax_rows(t.constant(Tensor::matrix(1, 2, {0, 0}))));
  CHECK(z[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));

  std::mt19937_64 g(5);
  for (int r = 0; r < 100; ++r) {
    const Tensor l = rnd(g, {3, 2 + static_cast<std::size_t>(r % 7)}, -30, 30);
    const double shift = (r - 50) * 13.7;
    Tensor ls = l;
    for (auto& v : ls.data()) v += shift;
    const Tensor a = t.value(log_softmax_rows(t.constant(l)));
    const Tensor b = t.value(log_softmax_rows(t.constant(ls)));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      long double s = 0;
      for (std::size_t c = 0; c < a.cols(); ++c) s += std::exp(static_cast<long double>(a.at(i, c)));
      CHECK(std::abs(static_cast<double>(std::log(s))) <= 1e-9);
    }
  }
  CHECK_THROWS_AS(log_softmax_rows(t.constant(Tensor(Shape{2, 1}))), ShapeError);
}

TEST_CASE("log_softmax_rows gradient against central differences") {
  std::mt19937_64 g(6);
  for (int r = 0; r < 30; ++r) {
    const Tensor l = rnd(g, {1 + static_cast<std::size_t>(r % 4), 2 + static_cast<std::size_t>(r % 6)}, -4, 4);
    const double err = fd::max_rel_err([](Tape&, const std::vector<Var>& v) { return weighted_sum(log_softmax_rows(v[0])); }, {l});
    CHECK(err < 1e-6);
  }
}

TEST_CASE("every op passes central differences on 100 random configurations") {
  std::mt19937_64 g(17);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  double worst = 0;
  for (int r = 0; r < 100; ++r) {
    const std::size_t n = dim(g), m = dim(g), p = dim(g);
    const Tensor A = rnd(g, {n, m}), B = rnd(g, {n, m}), M = rnd(g, {m, p}), bias = rnd(g, {1, m});
    const Tensor P = rnd(g, {n, m}, 0.2, 3);
    Tensor K = rnd(g, {n, m}, -3, 3);  // keep relu/clamp kinks out of the stencil
    for (auto& v : K.data())
      if (std::abs(v) < 1e-3 || std::abs(std::abs(v) - 1) < 1e-3) v += 0.01;
    const Tensor noise = rnd(g, {n, m});
    auto chk = [&](fd::Build f, std::vector<Tensor> in) { worst = std::max(worst, fd::max_rel_err(f, std::move(in))); };
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(matmul(v[0], v[1])); }, {A, M});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(add(v[0], v[1])); }, {A, B});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(sub(v[0], v[1])); }, {A, B});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(mul(v[0], v[1])); }, {A, B});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(bias_add(v[0], v[1])); }, {A, bias});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(tanh(v[0])); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(relu(v[0])); }, {K});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(scale(v[0], -2.5)); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(add_scalar(v[0], 1.5)); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(concat_cols(v[0], v[1])); }, {A, B});
    chk([m](Tape&, const std::vector<Var>& v) { return weighted_sum(slice_cols(v[0], m / 2, m)); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return mean(square(v[0])); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return sum(tanh(v[0])); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(mean_rows(v[0])); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(square(v[0])); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(exp(v[0])); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(exp_half(v[0])); }, {A});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(log(v[0])); }, {P});
    chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(clamp(v[0], -1.0, 1.0)); }, {K});
    chk([noise](Tape&, const std::vector<Var>& v) { return weighted_sum(gaussian_reparam(v[0], v[1], noise)); }, {A, B});
    if (m >= 2) chk([](Tape&, const std::vector<Var>& v) { return weighted_sum(log_softmax_rows(v[0])); }, {A});
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("composed MLP loss against central differences") {
  std::mt19937_64 g(23);
  for (int r = 0; r < 20; ++r) {
    const Tensor x = rnd(g, {5, 3}), w1 = rnd(g, {3, 4}, -1, 1), b1 = rnd(g, {1, 4}), w2 = rnd(g, {4, 3}, -1, 1);
    const Tensor y = rnd(g, {5, 3});
    const double err = fd::max_rel_err(
        [x, y](Tape& t, const std::vector<Var>& v) {
          const Var h = tanh(bias_add(matmul(t.constant(x), v[0]), v[1]));
          const Var out = log_softmax_rows(matmul(h, v[2]));
          return add(mean(square(sub(out, t.constant(y)))), scale(sum(exp(out)), 0.1));
        },
        {w1, b1, w2});
    CHECK(err < 1e-5);
  }
}

TEST_CASE("backward basics") {
  Tape t;
  const Tensor xv = Tensor::matrix(2, 2, {1, -2, 3, 0.5});
  const Var w = t.leaf(Tensor::matrix(2, 2, {0.1, 0.2, 0.3, 0.4}));
  const Var x = t.constant(xv);
  const Var loss = sum(mul(w, x));
  const auto g1 = t.backward(loss);
  CHECK(g1[w] == xv);
  const auto g2 = t.backward(loss);
  CHECK(g2[w] == g1[w]);
  CHECK_THROWS_AS(t.backward(mul(w, x)), InvalidInput);
}

TEST_CASE("gradients reach shared subexpressions once per use") {
  Tape t;
  const Var a = t.leaf(Tensor::matrix(1, 1, {3.0}));
  const Var loss = sum(mul(a, a));
  CHECK(t.backward(loss)[a].item() == 6.0);
}

TEST_CASE("tape replay is bit-identical") {
  auto run = [] {
    std::mt19937_64 g(1);
    Tape t;
    const Var w = t.leaf(rnd(g, {4, 3}));
    const Var x = t.constant(rnd(g, {6, 4}));
    const Var loss = mean(square(tanh(matmul(x, w))));
    return std::pair{t.value(loss).item(), t.backward(loss)[w]};
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("gaussian_reparam") {
  Tape t;
  const Var mu = t.leaf(Tensor::matrix(1, 3, {1, 2, 3}));
  const Var lv = t.leaf(Tensor::matrix(1, 3, {0, 0, 0}));
  CHECK(t.value(gaussian_reparam(mu, lv, Tensor(Shape{1, 3}, 0.0))) == t.value(mu));
  const Var z = gaussian_reparam(mu, lv, Tensor(Shape{1, 3}, 1.0));
  CHECK(t.value(z) == Tensor::matrix(1, 3, {2, 3, 4}));
  const auto g = t.backward(sum(z));
  CHECK(g[mu] == Tensor(Shape{1, 3}, 1.0));
  CHECK(g[lv] == Tensor(Shape{1, 3}, 0.5));

  std::mt19937_64 r(8);
  for (int i = 0; i < 20; ++i) {
    const Tensor noise = rnd(r, {3, 2});
    const double err = fd::max_rel_err(
        [noise](Tape&, const std::vector<Var>& v) { return weighted_sum(gaussian_reparam(v[0], v[1], noise)); },
        {rnd(r, {3, 2}), rnd(r, {3, 2})});
    CHECK(err < 1e-6);
  }
}

TEST_CASE("adam: zero gradient leaves params unchanged") {
  std::vector<Tensor> p{Tensor::matrix(1, 3, {1, 2, 3})};
  const std::vector<Tensor> g{Tensor(Shape{1, 3}, 0.0)};
  AdamState s;
  for (int i = 0; i < 10; ++i) adam_step(p, g, s, {});
  CHECK(p[0] == Tensor::matrix(1, 3, {1, 2, 3}));
}

TEST_CASE("adam: constant gradient gives steps of size lr") {
  std::vector<Tensor> p{Tensor::matrix(1, 2, {0, 0})};
  const std::vector<Tensor> g{Tensor::matrix(1, 2, {0.3, -7.0})};
  AdamState s;
  AdamHyper h;
  for (int i = 0; i < 200; ++i) {
    const Tensor before = p[0];
    adam_step(p, g, s, h);
    const double d0 = std::abs(p[0][0] - before[0]), d1 = std::abs(p[0][1] - before[1]);
    CHECK(std::abs(d0 - h.lr) <= 0.05 * h.lr);
    CHECK(std::abs(d1 - h.lr) <= 0.05 * h.lr);
  }
  CHECK(p[0][0] < 0);
  CHECK(p[0][1] > 0);
}

TEST_CASE("adam: deterministic given identical state") {
  std::vector<Tensor> p1{Tensor::matrix(1, 2, {0.5, -0.5})}, p2 = p1;
  AdamState s1, s2;
  for (int i = 0; i < 5; ++i) {
    const std::vector<Tensor> g{Tensor::matrix(1, 2, {std::sin(i * 1.0), std::cos(i * 1.0)})};
    adam_step(p1, g, s1, {});
    adam_step(p2, g, s2, {});
  }
  CHECK(p1[0] == p2[0]);
  CHECK(s1.t == s2.t);
}
