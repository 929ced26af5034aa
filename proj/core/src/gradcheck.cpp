#include "ccert/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ccert/rng.hpp"
#include "ccert/vae.hpp"

namespace ccert {

double rel_err(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

double fd_max_rel_err(const GraphFn& f, const std::vector<Tensor>& inputs, double h) {
  auto eval = [&](const std::vector<Tensor>& in) {
    Tape tape;
    std::vector<Var> vs;
    for (const auto& t : in) vs.push_back(tape.leaf(t));
    return tape.value(f(tape, vs)).item();
  };
  Tape tape;
  std::vector<Var> vs;
  for (const auto& t : inputs) vs.push_back(tape.leaf(t));
  const Var loss = f(tape, vs);
  const Gradients g = tape.backward(loss);

  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Tensor& analytic = g[vs[t]];
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double x0 = inputs[t][i];
      probe[t][i] = x0 + h;
      const double fp = eval(probe);
      probe[t][i] = x0 - h;
      const double fm = eval(probe);
      probe[t][i] = x0;
      worst = std::max(worst, rel_err(analytic[i], (fp - fm) / (2.0 * h)));
    }
  }
  return worst;
}

namespace {

Tensor random_tensor(Rng& rng, Shape s, double lo, double hi) {
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

// Keeps values at least `gap` away from every kink in `kinks`.
Tensor away_from(Rng& rng, Shape s, double lo, double hi, std::vector<double> kinks, double gap) {
  Tensor t(std::move(s));
  for (auto& v : t.data()) {
    do {
      v = lo + (hi - lo) * rng.uniform();
    } while (std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(v - k) < gap; }));
  }
  return t;
}

// Contract the op output with fixed uneven weights so every entry matters.
Var contract(Var out) {
  Tensor w(out.tape->value(out).shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + std::cos(1.7 * static_cast<double>(i));
  return sum(mul(out, out.tape->constant(w)));
}

}  // namespace

std::vector<GradcheckResult> gradcheck_suite(std::uint64_t seed, int configs) {
  Rng rng(seed);
  std::vector<GradcheckResult> results;
  auto dim = [&] { return 1 + rng.index(4); };

  auto run = [&](const std::string& name, auto make) {
    GradcheckResult r{name, 0.0, 0};
    for (int c = 0; c < configs; ++c) {
      auto [fn, inputs] = make();
      r.max_rel_err = std::max(r.max_rel_err, fd_max_rel_err(fn, inputs));
      ++r.cases;
    }
    results.push_back(r);
  };

  auto unary = [&](const std::string& name, auto op, double lo, double hi, std::vector<double> kinks = {}) {
    run(name, [&, op, lo, hi, kinks] {
      const Shape s{dim(), 1 + dim()};
      GraphFn fn = [op](Tape&, const std::vector<Var>& v) { return contract(op(v[0])); };
      return std::pair{fn, std::vector<Tensor>{away_from(rng, s, lo, hi, kinks, 1e-3)}};
    });
  };
  auto binary = [&](const std::string& name, auto op) {
    run(name, [&, op] {
      const Shape s{dim(), dim()};
      GraphFn fn = [op](Tape&, const std::vector<Var>& v) { return contract(op(v[0], v[1])); };
      return std::pair{fn, std::vector<Tensor>{random_tensor(rng, s, -2, 2), random_tensor(rng, s, -2, 2)}};
    });
  };

  run("matmul", [&] {
    const std::size_t n = dim(), m = dim(), p = dim();
    GraphFn fn = [](Tape&, const std::vector<Var>& v) { return contract(matmul(v[0], v[1])); };
    return std::pair{fn, std::vector<Tensor>{random_tensor(rng, {n, m}, -2, 2), random_tensor(rng, {m, p}, -2, 2)}};
  });
  binary("add", [](Var a, Var b) { return add(a, b); });
  binary("sub", [](Var a, Var b) { return sub(a, b); });
  binary("mul", [](Var a, Var b) { return mul(a, b); });
  run("bias_add", [&] {
    const std::size_t n = dim(), m = dim();
    GraphFn fn = [](Tape&, const std::vector<Var>& v) { return contract(bias_add(v[0], v[1])); };
    return std::pair{fn, std::vector<Tensor>{random_tensor(rng, {n, m}, -2, 2), random_tensor(rng, {1, m}, -2, 2)}};
  });
  unary("tanh", [](Var a) { return tanh(a); }, -3, 3);
  unary("relu", [](Var a) { return relu(a); }, -3, 3, {0.0});
  unary("scale", [](Var a) { return scale(a, -1.7); }, -3, 3);
  unary("add_scalar", [](Var a) { return add_scalar(a, 0.3); }, -3, 3);
  unary("square", [](Var a) { return square(a); }, -3, 3);
  unary("exp", [](Var a) { return exp(a); }, -3, 3);
  unary("exp_half", [](Var a) { return exp_half(a); }, -3, 3);
  unary("log", [](Var a) { return log(a); }, 0.1, 3);
  unary("clamp", [](Var a) { return clamp(a, -1.0, 1.0); }, -3, 3, {-1.0, 1.0});
  unary("mean_rows", [](Var a) { return mean_rows(a); }, -3, 3);
  unary("log_softmax_rows", [](Var a) { return log_softmax_rows(a); }, -5, 5);
  run("concat_cols", [&] {
    const std::size_t n = dim(), a = dim(), b = dim();
    GraphFn fn = [](Tape&, const std::vector<Var>& v) { return contract(concat_cols(v[0], v[1])); };
    return std::pair{fn, std::vector<Tensor>{random_tensor(rng, {n, a}, -2, 2), random_tensor(rng, {n, b}, -2, 2)}};
  });
  run("slice_cols", [&] {
    const std::size_t n = dim(), m = 1 + dim();
    const std::size_t b = rng.index(m);
    const std::size_t end = b + 1 + rng.index(m - b);
    GraphFn fn = [b, end](Tape&, const std::vector<Var>& v) { return contract(slice_cols(v[0], b, end)); };
    return std::pair{fn, std::vector<Tensor>{random_tensor(rng, {n, m}, -2, 2)}};
  });
  run("mean", [&] {
    GraphFn fn = [](Tape&, const std::vector<Var>& v) { return scale(mean(square(v[0])), 3.0); };
    return std::pair{fn, std::vector<Tensor>{random_tensor(rng, {dim(), dim()}, -2, 2)}};
  });
  run("sum", [&] {
    GraphFn fn = [](Tape&, const std::vector<Var>& v) { return sum(tanh(v[0])); };
    return std::pair{fn, std::vector<Tensor>{random_tensor(rng, {dim(), dim()}, -2, 2)}};
  });
  run("gaussian_reparam", [&] {
    const Shape s{dim(), dim()};
    const Tensor noise = random_tensor(rng, s, -2, 2);
    GraphFn fn = [noise](Tape&, const std::vector<Var>& v) { return contract(gaussian_reparam(v[0], v[1], noise)); };
    return std::pair{fn, std::vector<Tensor>{random_tensor(rng, s, -2, 2), random_tensor(rng, s, -2, 2)}};
  });

  // Full objective over every model parameter.
  run("four_term_loss", [&] {
    const ModelDims dims{1 + rng.index(4), 1 + rng.index(3), 2 + rng.index(3), 1 + rng.index(4)};
    const bool uses_t = rng.uniform() < 0.5;
    const auto params = ModelParams::init(dims, uses_t, rng.next_u64());
    const std::size_t n = 1 + rng.index(5);
    const Tensor x = random_tensor(rng, {n, dims.d}, -2, 2);
    Tensor t(Shape{n, dims.k});
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logits(dims.k);
      for (auto& l : logits) l = 2.0 * rng.normal();
      const auto p = softmax(logits);
      for (std::size_t c = 0; c < dims.k; ++c) t.at(i, c) = p[c];
    }
    Tensor noise(Shape{n, dims.l});
    for (auto& v : noise.data()) v = rng.normal();
    const LossWeights w{0.5 + 4.0 * rng.uniform(), 10.0 * rng.uniform(), rng.uniform()};
    GraphFn fn = [dims, uses_t, x, t, noise, w](Tape& tape, const std::vector<Var>& v) {
      ModelParams shape_only;
      shape_only.dims = dims;
      shape_only.decoder_uses_teacher = uses_t;
      const Bound b{v};
      const Var xv = tape.constant(x);
      const auto enc = encode(b, shape_only, xv);
      const Var z = gaussian_reparam(enc.mu, enc.logvar, noise);
      std::optional<Var> rows;
      if (uses_t) rows = tape.constant(t);
      const Var xhat = decode(b, shape_only, z, rows);
      const Var lp = log_softmax_rows(witness_logits(b, shape_only, z));
      return add(add(recon_loss(xhat, xv), scale(kl_z_loss(enc.mu, enc.logvar), w.beta_z)),
                 add(scale(align_loss(lp, t), w.lambda_align), scale(balance_loss(lp), w.lambda_bal)));
    };
    return std::pair{fn, params.tensors};
  });
  return results;
}

}  // namespace ccert
