#include "ccert/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "ccert/error.hpp"
#include "ccert/prob.hpp"

namespace ccert {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {

std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

Tape* same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw InvalidInput("operands belong to different tapes");
  return a.tape;
}

// C += A * B, (n x m)(m x p)
void gemm_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t m, std::size_t p) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * p;
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = a[i * m + k];
      if (aik == 0.0) continue;
      const double* brow = b + k * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
    }
  }
}

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != numel(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(OpKind kind, Var a, Var b, Tensor value, double p0, double p1, std::size_t i0, std::size_t i1) {
  if (a.tape != this || (b.tape != nullptr && b.tape != this)) {
    throw InvalidInput("operands belong to different tapes");
  }
  Node n;
  n.kind = kind;
  n.a = a.id;
  n.b = b.tape ? b.id : -1;
  n.value = std::move(value);
  n.p0 = p0;
  n.p1 = p1;
  n.i0 = i0;
  n.i1 = i1;
  n.requires_grad = node(a).requires_grad || (b.tape != nullptr && node(b).requires_grad);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var matmul(Var av, Var bv) {
  Tape* t = same_tape(av, bv);
  const Tensor& a = t->value(av);
  const Tensor& b = t->value(bv);
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) shape_fail("matmul", a.shape(), b.shape());
  Tensor c(Shape{a.rows(), b.cols()});
  gemm_acc(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(), b.cols());
  return t->record(OpKind::MatMul, av, bv, std::move(c));
}

namespace {

template <class F>
Var binary(const char* op, OpKind kind, Var av, Var bv, F f) {
  Tape* t = same_tape(av, bv);
  const Tensor& a = t->value(av);
  const Tensor& b = t->value(bv);
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = f(a[i], b[i]);
  return t->record(kind, av, bv, std::move(c));
}

template <class F>
Var unary(OpKind kind, Var av, F f, double p0 = 0.0, double p1 = 0.0) {
  if (av.tape == nullptr) throw InvalidInput("operand has no tape");
  return av.tape->record(kind, av, Var{}, map(av.tape->value(av), f), p0, p1);
}

}  // namespace

Var add(Var a, Var b) { return binary("add", OpKind::Add, a, b, [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return binary("sub", OpKind::Sub, a, b, [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return binary("mul", OpKind::Mul, a, b, [](double x, double y) { return x * y; }); }

Var bias_add(Var av, Var bv) {
  Tape* t = same_tape(av, bv);
  const Tensor& a = t->value(av);
  const Tensor& b = t->value(bv);
  require_rank2("bias_add", a);
  if (b.rank() != 2 || b.rows() != 1 || b.cols() != a.cols()) shape_fail("bias_add", a.shape(), b.shape());
  Tensor c = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c.at(i, j) += b[j];
  return t->record(OpKind::BiasAdd, av, bv, std::move(c));
}

Var tanh(Var a) { return unary(OpKind::Tanh, a, [](double x) { return std::tanh(x); }); }
Var relu(Var a) { return unary(OpKind::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }
Var scale(Var a, double s) { return unary(OpKind::Scale, a, [s](double x) { return s * x; }, s); }
Var add_scalar(Var a, double s) { return unary(OpKind::AddScalar, a, [s](double x) { return x + s; }, s); }
Var square(Var a) { return unary(OpKind::Square, a, [](double x) { return x * x; }); }
Var exp(Var a) { return unary(OpKind::Exp, a, [](double x) { return std::exp(x); }); }
Var exp_half(Var a) { return unary(OpKind::ExpHalf, a, [](double x) { return std::exp(0.5 * x); }); }
Var log(Var a) { return unary(OpKind::Log, a, [](double x) { return std::log(x); }); }

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw InvalidInput("clamp: lo > hi");
  return unary(OpKind::Clamp, a, [lo, hi](double x) { return std::clamp(x, lo, hi); }, lo, hi);
}

Var sum(Var a) {
  if (a.tape == nullptr) throw InvalidInput("operand has no tape");
  CompensatedSum s;
  for (double v : a.tape->value(a).data()) s.add(v);
  return a.tape->record(OpKind::Sum, a, Var{}, Tensor::scalar(s.value()));
}

Var mean(Var a) {
  if (a.tape == nullptr) throw InvalidInput("operand has no tape");
  const Tensor& x = a.tape->value(a);
  if (x.size() == 0) throw ShapeError("mean of an empty tensor");
  CompensatedSum s;
  for (double v : x.data()) s.add(v);
  return a.tape->record(OpKind::Mean, a, Var{}, Tensor::scalar(s.value() / static_cast<double>(x.size())));
}

Var mean_rows(Var a) {
  if (a.tape == nullptr) throw InvalidInput("operand has no tape");
  const Tensor& x = a.tape->value(a);
  require_rank2("mean_rows", x);
  std::vector<CompensatedSum> acc(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) acc[j].add(x.at(i, j));
  Tensor y(Shape{1, x.cols()});
  for (std::size_t j = 0; j < x.cols(); ++j) y[j] = acc[j].value() / static_cast<double>(x.rows());
  return a.tape->record(OpKind::MeanRows, a, Var{}, std::move(y));
}

Var concat_cols(Var av, Var bv) {
  Tape* t = same_tape(av, bv);
  const Tensor& a = t->value(av);
  const Tensor& b = t->value(bv);
  require_rank2("concat", a);
  require_rank2("concat", b);
  if (a.rows() != b.rows()) shape_fail("concat", a.shape(), b.shape());
  const std::size_t ca = a.cols(), cb = b.cols();
  Tensor c(Shape{a.rows(), ca + cb});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < ca; ++j) c.at(i, j) = a.at(i, j);
    for (std::size_t j = 0; j < cb; ++j) c.at(i, ca + j) = b.at(i, j);
  }
  return t->record(OpKind::ConcatCols, av, bv, std::move(c));
}

Var slice_cols(Var av, std::size_t begin, std::size_t end) {
  if (av.tape == nullptr) throw InvalidInput("operand has no tape");
  const Tensor& a = av.tape->value(av);
  require_rank2("slice", a);
  if (begin >= end || end > a.cols()) {
    throw ShapeError("slice: columns [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for shape " + shape_str(a.shape()));
  }
  Tensor c(Shape{a.rows(), end - begin});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) c.at(i, j - begin) = a.at(i, j);
  return av.tape->record(OpKind::SliceCols, av, Var{}, std::move(c), 0.0, 0.0, begin, end);
}

Var log_softmax_rows(Var av) {
  if (av.tape == nullptr) throw InvalidInput("operand has no tape");
  const Tensor& a = av.tape->value(av);
  require_rank2("log_softmax_rows", a);
  if (a.cols() < 2) throw ShapeError("log_softmax_rows: need K >= 2, got " + shape_str(a.shape()));
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    const double lse = logsumexp(r);
    for (std::size_t j = 0; j < a.cols(); ++j) y.at(i, j) = r[j] - lse;
  }
  return av.tape->record(OpKind::LogSoftmaxRows, av, Var{}, std::move(y));
}

Var gaussian_reparam(Var mu, Var logvar, const Tensor& noise) {
  Tape* t = same_tape(mu, logvar);
  const Shape& ms = t->value(mu).shape();
  if (ms != t->value(logvar).shape()) shape_fail("gaussian_reparam", ms, t->value(logvar).shape());
  if (ms != noise.shape()) shape_fail("gaussian_reparam", ms, noise.shape());
  Var eps = t->constant(noise);
  return add(mu, mul(exp_half(logvar), eps));
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape != this) throw InvalidInput("backward: loss node belongs to another tape");
  const Node& ln = node(loss);
  if (ln.value.size() != 1) {
    throw InvalidInput("backward: loss must be scalar, got shape " + shape_str(ln.value.shape()));
  }
  std::vector<Tensor> g(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) g[i] = Tensor(nodes_[i].value.shape(), 0.0);
  g[static_cast<std::size_t>(loss.id)][0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.kind == OpKind::Leaf) continue;
    const Tensor& dy = g[static_cast<std::size_t>(id)];
    const Tensor& y = n.value;
    auto in_a = [&]() -> Tensor& { return g[static_cast<std::size_t>(n.a)]; };
    auto in_b = [&]() -> Tensor& { return g[static_cast<std::size_t>(n.b)]; };
    auto val_a = [&]() -> const Tensor& { return nodes_[static_cast<std::size_t>(n.a)].value; };
    auto val_b = [&]() -> const Tensor& { return nodes_[static_cast<std::size_t>(n.b)].value; };
    auto needs_a = [&]() { return nodes_[static_cast<std::size_t>(n.a)].requires_grad; };
    auto needs_b = [&]() { return nodes_[static_cast<std::size_t>(n.b)].requires_grad; };

    switch (n.kind) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMul: {
        const Tensor& a = val_a();
        const Tensor& b = val_b();
        const std::size_t rn = a.rows(), rm = a.cols(), rp = b.cols();
        if (needs_a()) {
          Tensor& ga = in_a();
          for (std::size_t i = 0; i < rn; ++i)
            for (std::size_t k = 0; k < rm; ++k) {
              double s = 0.0;
              for (std::size_t j = 0; j < rp; ++j) s += dy[i * rp + j] * b[k * rp + j];
              ga[i * rm + k] += s;
            }
        }
        if (needs_b()) {
          Tensor& gb = in_b();
          for (std::size_t i = 0; i < rn; ++i)
            for (std::size_t k = 0; k < rm; ++k) {
              const double aik = a[i * rm + k];
              if (aik == 0.0) continue;
              for (std::size_t j = 0; j < rp; ++j) gb[k * rp + j] += aik * dy[i * rp + j];
            }
        }
        break;
      }
      case OpKind::Add:
        if (needs_a())
          for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += dy[i];
        if (needs_b())
          for (std::size_t i = 0; i < dy.size(); ++i) in_b()[i] += dy[i];
        break;
      case OpKind::Sub:
        if (needs_a())
          for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += dy[i];
        if (needs_b())
          for (std::size_t i = 0; i < dy.size(); ++i) in_b()[i] -= dy[i];
        break;
      case OpKind::Mul:
        if (needs_a())
          for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += dy[i] * val_b()[i];
        if (needs_b())
          for (std::size_t i = 0; i < dy.size(); ++i) in_b()[i] += dy[i] * val_a()[i];
        break;
      case OpKind::BiasAdd:
        if (needs_a())
          for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += dy[i];
        if (needs_b()) {
          Tensor& gb = in_b();
          const std::size_t cols = dy.cols();
          for (std::size_t i = 0; i < dy.rows(); ++i)
            for (std::size_t j = 0; j < cols; ++j) gb[j] += dy[i * cols + j];
        }
        break;
      case OpKind::Tanh:
        for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += dy[i] * (1.0 - y[i] * y[i]);
        break;
      case OpKind::Relu:
        for (std::size_t i = 0; i < dy.size(); ++i)
          if (val_a()[i] > 0.0) in_a()[i] += dy[i];
        break;
      case OpKind::Scale:
        for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += n.p0 * dy[i];
        break;
      case OpKind::AddScalar:
        for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += dy[i];
        break;
      case OpKind::ConcatCols: {
        const std::size_t ca = val_a().cols(), cb = val_b().cols();
        for (std::size_t i = 0; i < dy.rows(); ++i) {
          if (needs_a())
            for (std::size_t j = 0; j < ca; ++j) in_a()[i * ca + j] += dy[i * (ca + cb) + j];
          if (needs_b())
            for (std::size_t j = 0; j < cb; ++j) in_b()[i * cb + j] += dy[i * (ca + cb) + ca + j];
        }
        break;
      }
      case OpKind::SliceCols: {
        Tensor& ga = in_a();
        const std::size_t cols = val_a().cols(), w = n.i1 - n.i0;
        for (std::size_t i = 0; i < dy.rows(); ++i)
          for (std::size_t j = 0; j < w; ++j) ga[i * cols + n.i0 + j] += dy[i * w + j];
        break;
      }
      case OpKind::Mean: {
        Tensor& ga = in_a();
        const double d = dy[0] / static_cast<double>(ga.size());
        for (double& v : ga.data()) v += d;
        break;
      }
      case OpKind::Sum:
        for (double& v : in_a().data()) v += dy[0];
        break;
      case OpKind::MeanRows: {
        Tensor& ga = in_a();
        const std::size_t rows = ga.rows(), cols = ga.cols();
        const double inv = 1.0 / static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += dy[j] * inv;
        break;
      }
      case OpKind::Square:
        for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += 2.0 * val_a()[i] * dy[i];
        break;
      case OpKind::Exp:
        for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += y[i] * dy[i];
        break;
      case OpKind::ExpHalf:
        for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += 0.5 * y[i] * dy[i];
        break;
      case OpKind::Log:
        for (std::size_t i = 0; i < dy.size(); ++i) in_a()[i] += dy[i] / val_a()[i];
        break;
      case OpKind::Clamp:
        for (std::size_t i = 0; i < dy.size(); ++i) {
          const double x = val_a()[i];
          if (x >= n.p0 && x <= n.p1) in_a()[i] += dy[i];
        }
        break;
      case OpKind::LogSoftmaxRows: {
        Tensor& ga = in_a();
        const std::size_t rows = y.rows(), cols = y.cols();
        for (std::size_t i = 0; i < rows; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < cols; ++j) s += dy[i * cols + j];
          for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += dy[i * cols + j] - std::exp(y[i * cols + j]) * s;
        }
        break;
      }
    }
  }
  return Gradients(std::move(g));
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, const AdamHyper& h) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape(), 0.0);
      state.v.emplace_back(p.shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  ++state.t;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params[p];
    const Tensor& g = grads[p];
    if (w.shape() != g.shape()) shape_fail("adam_step", w.shape(), g.shape());
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

}  // namespace ccert
