#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every forward op as a node that references strictly earlier
// nodes, so the node order is already a topological order and backward is a
// single reverse sweep. There is no broadcasting except bias_add, and noise is
// always an explicit constant operand.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ccert {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor(Shape{rows, cols}, std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  // Row/column counts of a rank-2 tensor.
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * shape_[1], shape_[1]}; }
  double item() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

// Handle to a tape node. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

enum class OpKind {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  BiasAdd,
  Tanh,
  Relu,
  Scale,
  AddScalar,
  ConcatCols,
  SliceCols,
  Mean,
  Sum,
  MeanRows,
  Square,
  Exp,
  ExpHalf,
  Log,
  Clamp,
  LogSoftmaxRows,
};

class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> g) : g_(std::move(g)) {}
  // Gradient of the loss w.r.t. the node; zero tensor if the node had no path.
  const Tensor& operator[](Var v) const { return g_.at(static_cast<std::size_t>(v.id)); }

 private:
  std::vector<Tensor> g_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (model parameter).
  Var leaf(Tensor value);
  // Non-differentiable input (data, targets, noise).
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from a scalar node. Does not mutate the tape, so repeated
  // calls return identical gradients.
  Gradients backward(Var loss) const;

  // Appends an op node; used by the op functions below. `b` may be a
  // default-constructed Var for unary ops.
  Var record(OpKind kind, Var a, Var b, Tensor value, double p0 = 0.0, double p1 = 0.0, std::size_t i0 = 0,
             std::size_t i1 = 0);

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    int a = -1;
    int b = -1;
    Tensor value;
    double p0 = 0.0;
    double p1 = 0.0;
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    bool requires_grad = false;
  };

  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a: N x M, bias: 1 x M, added to every row.
Var bias_add(Var a, Var bias);
Var tanh(Var a);
Var relu(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var concat_cols(Var a, Var b);
// Columns [begin, end).
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var mean(Var a);
Var sum(Var a);
// Column means: N x M -> 1 x M.
Var mean_rows(Var a);
Var square(Var a);
Var exp(Var a);
// e^{0.5 x}
Var exp_half(Var a);
Var log(Var a);
// Gradient passes only where lo <= x <= hi.
Var clamp(Var a, double lo, double hi);
Var log_softmax_rows(Var logits);

// z = mu + noise * e^{0.5 logvar}; noise is recorded as a constant.
Var gaussian_reparam(Var mu, Var logvar, const Tensor& noise);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// One bias-corrected Adam update in place. Moments are lazily sized on the
// first call.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               const AdamHyper& hyper);

}  // namespace ccert
