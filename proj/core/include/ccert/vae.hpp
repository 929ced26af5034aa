#pragma once

// Teacher-guided latent model: encoder q(z|x), decoder p(x|z[,T(x)]) and the
// z-only raw witness head, plus the four-term objective.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccert/autodiff.hpp"
#include "ccert/prob.hpp"
#include "ccert/rng.hpp"

namespace ccert {

struct ModelDims {
  std::size_t d = 16;  // input
  std::size_t l = 4;   // latent
  std::size_t k = 8;   // classes
  std::size_t h = 32;  // hidden width
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Parameter slots, in checkpoint order.
enum Param : std::size_t {
  kEncW1, kEncB1, kEncW2, kEncB2, kEncWMu, kEncBMu, kEncWLv, kEncBLv,
  kDecW1, kDecB1, kDecW2, kDecB2, kDecWOut, kDecBOut,
  kHeadW1, kHeadB1, kHeadWOut, kHeadBOut,
  kParamCount
};

const char* param_name(std::size_t slot);

struct ModelParams {
  ModelDims dims;
  bool decoder_uses_teacher = true;
  std::vector<Tensor> tensors;  // kParamCount entries

  // Tanh-scaled Gaussian weights (std 1/sqrt(fan_in)), zero biases.
  static ModelParams init(const ModelDims& dims, bool decoder_uses_teacher, std::uint64_t seed);
  // Throws ShapeError if any tensor disagrees with dims. The head's input
  // width is checked against L here, which is what keeps the witness z-only.
  void validate() const;

  Tensor& operator[](std::size_t slot) { return tensors.at(slot); }
  const Tensor& operator[](std::size_t slot) const { return tensors.at(slot); }
  std::size_t num_scalars() const;
};

// Tape bindings for one forward pass. Leaves require grad only when
// `trainable` was set.
struct Bound {
  std::vector<Var> p;
};
Bound bind(Tape& tape, const ModelParams& params, bool trainable);

struct EncodedVars {
  Var mu;
  Var logvar;
};
EncodedVars encode(const Bound& b, const ModelParams& params, Var x);
Var decode(const Bound& b, const ModelParams& params, Var z, std::optional<Var> teacher_rows);
// Head logits from z only.
Var witness_logits(const Bound& b, const ModelParams& params, Var z);

// mean_x KL(T_x || S_x) with T as constant probabilities. The T ln T part is
// folded in as a constant so the value is the KL itself.
Var align_loss(Var witness_log_probs, const Tensor& teacher_probs);
// KL(mean_x S_x || uniform).
Var balance_loss(Var witness_log_probs);
// 0.5 * mean_x sum_j (mu^2 + e^logvar - 1 - logvar)
Var kl_z_loss(Var mu, Var logvar);
// mean_x sum_j (xhat - x)^2
Var recon_loss(Var xhat, Var x);

// Plain (tape-free) evaluation.
struct Encoded {
  Tensor mu;
  Tensor logvar;
};
Encoded encode(const ModelParams& params, const Tensor& x);
// teacher_rows: N x K probabilities, required when the decoder uses T.
Tensor decode(const ModelParams& params, const Tensor& z, const Tensor* teacher_rows);

struct Witness {
  AssignmentMatrix probs;
  Tensor logits;
  Tensor log_probs;
};
Witness raw_witness(const ModelParams& params, const Tensor& z);

struct LossWeights {
  double beta_z = 4.0;
  double lambda_align = 10.0;
  double lambda_bal = 1.0;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl_z = 0.0;
  double align_raw = 0.0;
  double balance = 0.0;
  double total = 0.0;
  LossWeights weights;
};

struct LossInputs {
  const Tensor* x = nullptr;              // N x D
  const Tensor* teacher_probs = nullptr;  // N x K alignment targets
  // Rows fed to a teacher-conditioned decoder; defaults to teacher_probs.
  const Tensor* decoder_rows = nullptr;
  const Tensor* noise = nullptr;  // N x L
};

struct LossGraph {
  std::unique_ptr<Tape> tape;
  Bound bound;
  Var total, recon, kl_z, align, balance, logits, mu, logvar;
  LossBreakdown values;

  // Gradients of `loss` for every parameter, in slot order.
  std::vector<Tensor> param_grads(Var loss) const;
};

LossGraph losses(const ModelParams& params, const LossInputs& in, const LossWeights& weights);

struct Checkpoint {
  ModelParams params;
  AdamState optimizer;
  Rng::State rng_state{};
  long step = 0;
  std::vector<std::string> mode_lineage;
  std::optional<std::uint64_t> teacher_fingerprint;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ccert
