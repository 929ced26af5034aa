#pragma once

// Warm-up, the four training modes, the margin-keyed alignment schedule and
// the two gradient-flow diagnostics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ccert/autodiff.hpp"
#include "ccert/kv_config.hpp"
#include "ccert/metrics.hpp"
#include "ccert/prob.hpp"
#include "ccert/rng.hpp"
#include "ccert/vae.hpp"

namespace ccert {

enum class Mode { Full, NoAlign, Rescue, FixedT0 };
enum class LambdaTier { Base, Guard, Rescue };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);  // ConfigError on unknown names
const char* tier_name(LambdaTier t);

struct Schedule {
  bool enabled = false;  // off: lambda_align from the loss weights throughout
  double lambda_base = 10.0;
  double lambda_guard = 20.0;
  double lambda_rescue = 40.0;
  double delta_band = 0.2;
  void validate() const;
};

struct RunConfig {
  Mode mode = Mode::Full;
  long steps = 2000;
  long warmup_steps = 1500;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  LossWeights weights;
  double tau = kDefaultTau;
  Schedule schedule;
  long report_every = 100;
  std::string teacher_source = "search";  // "search" or a cache path
  std::optional<std::string> init_checkpoint;
  ModelDims dims;  // d is taken from the data
  bool decoder_uses_teacher = true;
  AdamHyper adam{3e-3, 0.9, 0.999, 1e-8};
  double psnr_peak = 1.0;

  void validate() const;
};

// Config-file keys understood by run_config_from.
std::set<std::string> run_config_keys();
RunConfig run_config_from(const KvConfig& kv);
KvConfig to_kv(const RunConfig& cfg);

struct Targets {
  AssignmentMatrix rows;
  TargetKind kind = TargetKind::SearchedTeacher;
  std::uint64_t fingerprint = 0;
};

struct MetricsRecord {
  long step = 0;
  Mode mode = Mode::Full;
  std::uint64_t seed = 0;
  CertificateReport report;
  double recon = 0.0;
  double kl_z = 0.0;
  double balance = 0.0;
  LambdaTier tier = LambdaTier::Base;
  double lambda_value = 0.0;
  double psnr = 0.0;
  std::size_t active_units = 0;
};

std::string metrics_json(const MetricsRecord& r);

struct TrainState {
  ModelParams params;
  AdamState optimizer;
  Rng rng;
  long step = 0;
  std::optional<CertificateReport> last_report;
  LambdaTier tier = LambdaTier::Base;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRecord> records;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

struct WarmupResult {
  Checkpoint checkpoint;
  Tensor features;  // N x L posterior means
  std::vector<double> loss_trace;
};

// lambda_align is forced to 0; a teacher-conditioned decoder sees uniform
// rows, so nothing but z can carry per-sample information.
WarmupResult warmup(const RunConfig& cfg, const Tensor& x);

// Targets must already be fixed. Rescue needs `init`; the other modes start
// from it when given and from a fresh seeded model otherwise. Optimizer
// moments always start at zero.
TrainResult train(const RunConfig& cfg, const Tensor& x, const Targets& targets, const std::optional<Checkpoint>& init,
                  const MetricsSink& sink = {});

struct TierChoice {
  LambdaTier tier;
  double lambda;
};
TierChoice lambda_schedule(double g_tau, const Schedule& schedule);

struct DriftProbe {
  double inner = 0.0;     // <grad L_align, grad L_0>
  double align_sq = 0.0;  // |grad L_align|^2
  double g_dot_pred = 0.0;
};

// L_0 is the objective without the alignment term. Diagnostic only.
DriftProbe drift_probe(const ModelParams& params, const LossInputs& batch, const LossWeights& weights, double lambda);

// Gradient descent on free per-sample logits for sum_i KL(T_i || softmax(u_i)),
// starting at u = 0. Returns L at every step (steps + 1 values).
std::vector<double> free_logit_flow_check(const AssignmentMatrix& teacher_rows, int steps, double lr = 0.1,
                                          std::vector<std::vector<double>>* final_probs = nullptr);

}  // namespace ccert
