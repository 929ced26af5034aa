#include "ccert/trainer.hpp"

#include <cmath>

#include "ccert/error.hpp"
#include "ccert/serialize.hpp"
#include "ccert/teacher.hpp"
#include "json_util.hpp"

namespace ccert {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Full: return "full";
    case Mode::NoAlign: return "noalign";
    case Mode::Rescue: return "rescue";
    case Mode::FixedT0: return "fixed_t0";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "full") return Mode::Full;
  if (s == "noalign") return Mode::NoAlign;
  if (s == "rescue") return Mode::Rescue;
  if (s == "fixed_t0") return Mode::FixedT0;
  throw ConfigError("unknown mode '" + s + "' (expected full, noalign, rescue or fixed_t0)");
}

const char* tier_name(LambdaTier t) {
  switch (t) {
    case LambdaTier::Base: return "base";
    case LambdaTier::Guard: return "guard";
    case LambdaTier::Rescue: return "rescue";
  }
  return "?";
}

void Schedule::validate() const {
  for (double v : {lambda_base, lambda_guard, lambda_rescue, delta_band}) {
    if (!std::isfinite(v)) throw ConfigError("schedule values must be finite");
  }
  if (!(lambda_rescue >= lambda_guard && lambda_guard >= lambda_base && lambda_base >= 0.0)) {
    throw ConfigError("schedule needs lambda_rescue >= lambda_guard >= lambda_base >= 0");
  }
  if (delta_band < 0.0) throw ConfigError("schedule delta_band must be >= 0");
}

void RunConfig::validate() const {
  if (mode == Mode::Rescue && !init_checkpoint) throw ConfigError("mode rescue requires an init checkpoint");
  if (steps < 0 || warmup_steps < 1) throw ConfigError("steps must be >= 0 and warmup_steps >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (report_every < 1) throw ConfigError("report_every must be >= 1");
  for (double v : {weights.beta_z, weights.lambda_align, weights.lambda_bal, tau}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights and tau must be finite and >= 0");
  }
  if (!(adam.lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(psnr_peak > 0.0)) throw ConfigError("psnr_peak must be > 0");
  if (dims.l < 1 || dims.h < 1 || dims.k < 2) throw ConfigError("need latent >= 1, hidden >= 1, classes >= 2");
  schedule.validate();
}

std::set<std::string> run_config_keys() {
  return {"mode",          "steps",        "warmup_steps",  "batch_size",  "seed",         "beta_z",
          "lambda_align",  "lambda_bal",   "tau",           "schedule",    "lambda_base",  "lambda_guard",
          "lambda_rescue", "delta_band",   "report_every",  "teacher_source", "init_checkpoint", "latent",
          "classes",       "hidden",       "decoder_uses_teacher", "lr",  "psnr_peak"};
}

RunConfig run_config_from(const KvConfig& kv) {
  RunConfig c;
  c.mode = parse_mode(kv.get("mode", mode_name(c.mode)));
  c.steps = kv.get_long("steps", c.steps);
  c.warmup_steps = kv.get_long("warmup_steps", c.warmup_steps);
  const long batch = kv.get_long("batch_size", static_cast<long>(c.batch_size));
  if (batch < 1) throw ConfigError("batch_size must be >= 1");
  c.batch_size = static_cast<std::size_t>(batch);
  const long seed = kv.get_long("seed", 0);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.weights.beta_z = kv.get_double("beta_z", c.weights.beta_z);
  c.weights.lambda_align = kv.get_double("lambda_align", c.weights.lambda_align);
  c.weights.lambda_bal = kv.get_double("lambda_bal", c.weights.lambda_bal);
  c.tau = kv.get_double("tau", c.tau);
  c.schedule.enabled = kv.get_bool("schedule", c.schedule.enabled);
  c.schedule.lambda_base = kv.get_double("lambda_base", c.schedule.lambda_base);
  c.schedule.lambda_guard = kv.get_double("lambda_guard", c.schedule.lambda_guard);
  c.schedule.lambda_rescue = kv.get_double("lambda_rescue", c.schedule.lambda_rescue);
  c.schedule.delta_band = kv.get_double("delta_band", c.schedule.delta_band);
  c.report_every = kv.get_long("report_every", c.report_every);
  c.teacher_source = kv.get("teacher_source", c.teacher_source);
  if (kv.has("init_checkpoint") && !kv.get("init_checkpoint", "").empty()) c.init_checkpoint = kv.get("init_checkpoint", "");
  auto dim = [&](const char* key, std::size_t fallback) {
    const long v = kv.get_long(key, static_cast<long>(fallback));
    if (v < 1) throw ConfigError(std::string(key) + " must be >= 1");
    return static_cast<std::size_t>(v);
  };
  c.dims.l = dim("latent", c.dims.l);
  c.dims.k = dim("classes", c.dims.k);
  c.dims.h = dim("hidden", c.dims.h);
  c.decoder_uses_teacher = kv.get_bool("decoder_uses_teacher", c.decoder_uses_teacher);
  c.adam.lr = kv.get_double("lr", c.adam.lr);
  c.psnr_peak = kv.get_double("psnr_peak", c.psnr_peak);
  return c;
}

KvConfig to_kv(const RunConfig& c) {
  KvConfig kv(run_config_keys());
  auto num = [](double v) { return format_double(v); };
  kv.set("mode", mode_name(c.mode));
  kv.set("steps", std::to_string(c.steps));
  kv.set("warmup_steps", std::to_string(c.warmup_steps));
  kv.set("batch_size", std::to_string(c.batch_size));
  kv.set("seed", std::to_string(c.seed));
  kv.set("beta_z", num(c.weights.beta_z));
  kv.set("lambda_align", num(c.weights.lambda_align));
  kv.set("lambda_bal", num(c.weights.lambda_bal));
  kv.set("tau", num(c.tau));
  kv.set("schedule", c.schedule.enabled ? "true" : "false");
  kv.set("lambda_base", num(c.schedule.lambda_base));
  kv.set("lambda_guard", num(c.schedule.lambda_guard));
  kv.set("lambda_rescue", num(c.schedule.lambda_rescue));
  kv.set("delta_band", num(c.schedule.delta_band));
  kv.set("report_every", std::to_string(c.report_every));
  kv.set("teacher_source", c.teacher_source);
  kv.set("init_checkpoint", c.init_checkpoint.value_or(""));
  kv.set("latent", std::to_string(c.dims.l));
  kv.set("classes", std::to_string(c.dims.k));
  kv.set("hidden", std::to_string(c.dims.h));
  kv.set("decoder_uses_teacher", c.decoder_uses_teacher ? "true" : "false");
  kv.set("lr", num(c.adam.lr));
  kv.set("psnr_peak", num(c.psnr_peak));
  return kv;
}

std::string metrics_json(const MetricsRecord& r) {
  detail::json j;
  j["step"] = r.step;
  j["mode"] = mode_name(r.mode);
  j["seed"] = r.seed;
  j["i_t"] = r.report.i_t;
  j["l_align_raw"] = r.report.l_align_raw;
  j["bare_margin"] = r.report.bare_margin;
  j["g_tau"] = r.report.g_tau;
  j["student_mi"] = r.report.student_mi;
  j["recon"] = r.recon;
  j["kl_z"] = r.kl_z;
  j["balance"] = r.balance;
  j["lambda_tier"] = tier_name(r.tier);
  j["lambda_value"] = r.lambda_value;
  j["psnr"] = r.psnr;
  j["active_units"] = r.active_units;
  j["target_kind"] = target_kind_name(r.report.target_kind);
  return detail::dump17(j);
}

TierChoice lambda_schedule(double g, const Schedule& s) {
  if (g > s.delta_band) return {LambdaTier::Base, s.lambda_base};
  if (g > 0.0) return {LambdaTier::Guard, s.lambda_guard};
  return {LambdaTier::Rescue, s.lambda_rescue};
}

namespace {

constexpr std::uint64_t kWarmupSalt = 0x5741524d55500000ULL;

std::uint64_t run_salt(Mode m) { return 0x52554e0000000000ULL + static_cast<std::uint64_t>(m) + 1; }

Tensor to_tensor(const AssignmentMatrix& a) { return Tensor(Shape{a.n(), a.k()}, a.data()); }

void gather_rows(const Tensor& src, const std::vector<std::size_t>& idx, Tensor& dst) {
  const std::size_t w = src.cols();
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < w; ++c) dst.at(r, c) = src.at(idx[r], c);
}

struct BatchBuffers {
  std::vector<std::size_t> idx;
  Tensor x, t, noise;
  BatchBuffers(std::size_t b, std::size_t d, std::size_t k, std::size_t l)
      : idx(b), x(Shape{b, d}), t(Shape{b, k}), noise(Shape{b, l}) {}
};

void draw_batch(Rng& rng, const Tensor& x, const Tensor& t, BatchBuffers& buf) {
  for (auto& i : buf.idx) i = rng.index(x.rows());
  gather_rows(x, buf.idx, buf.x);
  gather_rows(t, buf.idx, buf.t);
  for (auto& v : buf.noise.data()) v = rng.normal();
}

bool all_finite(const std::vector<Tensor>& ts) {
  for (const auto& t : ts)
    for (double v : t.data())
      if (!std::isfinite(v)) return false;
  return true;
}

// Deterministic full-set evaluation at z = mu(x).
MetricsRecord evaluate(const ModelParams& params, const Tensor& x, const Tensor& trows, const Targets& targets,
                       const RunConfig& cfg) {
  MetricsRecord r;
  const auto enc = encode(params, x);
  const auto w = raw_witness(params, enc.mu);
  r.report = certify(w.log_probs, targets.rows, cfg.tau, targets.kind, targets.fingerprint);
  const Tensor xhat = decode(params, enc.mu, &trows);
  const std::size_t n = x.rows();
  CompensatedSum rec;
  for (std::size_t i = 0; i < x.size(); ++i) rec.add((xhat[i] - x[i]) * (xhat[i] - x[i]));
  r.recon = rec.value() / static_cast<double>(n);
  CompensatedSum kz;
  for (std::size_t i = 0; i < enc.mu.size(); ++i) {
    const double lv = enc.logvar[i];
    kz.add(enc.mu[i] * enc.mu[i] + std::exp(lv) - 1.0 - lv);
  }
  r.kl_z = 0.5 * kz.value() / static_cast<double>(n);
  const auto sbar = mean_assignment(w.probs);
  std::vector<double> ulog(sbar.size(), -std::log(static_cast<double>(sbar.size())));
  r.balance = kl(sbar, ulog);
  r.psnr = psnr(x, xhat, cfg.psnr_peak);
  r.active_units = n >= 2 ? active_units(enc.mu) : 0;
  return r;
}

void check_data(const ModelParams& p, const Tensor& x) {
  if (x.rank() != 2 || x.rows() < 1) throw InvalidInput("training data must be a non-empty N x D matrix");
  if (x.cols() != p.dims.d) {
    throw ConfigError("data has D=" + std::to_string(x.cols()) + " but the model expects D=" + std::to_string(p.dims.d));
  }
}

}  // namespace

WarmupResult warmup(const RunConfig& cfg, const Tensor& x) {
  cfg.validate();
  ModelDims dims = cfg.dims;
  dims.d = x.cols();
  ModelParams params = ModelParams::init(dims, cfg.decoder_uses_teacher, cfg.seed);
  check_data(params, x);
  Rng rng(cfg.seed ^ kWarmupSalt);
  AdamState opt;
  LossWeights w = cfg.weights;
  w.lambda_align = 0.0;
  const Tensor uniform_rows(Shape{cfg.batch_size, dims.k}, 1.0 / static_cast<double>(dims.k));
  BatchBuffers buf(cfg.batch_size, dims.d, dims.k, dims.l);
  const Tensor all_uniform(Shape{x.rows(), dims.k}, 1.0 / static_cast<double>(dims.k));

  WarmupResult out;
  for (long step = 1; step <= cfg.warmup_steps; ++step) {
    draw_batch(rng, x, all_uniform, buf);
    const auto g = losses(params, {&buf.x, &uniform_rows, &uniform_rows, &buf.noise}, w);
    if (!std::isfinite(g.values.total)) throw DivergedError("warm-up loss is not finite", step);
    const auto grads = g.param_grads(g.total);
    if (!all_finite(grads)) throw DivergedError("warm-up gradient is not finite", step);
    adam_step(params.tensors, grads, opt, cfg.adam);
    out.loss_trace.push_back(g.values.total);
  }
  out.features = encode(params, x).mu;
  out.checkpoint.params = std::move(params);
  out.checkpoint.optimizer = std::move(opt);
  out.checkpoint.rng_state = rng.state();
  out.checkpoint.step = cfg.warmup_steps;
  out.checkpoint.mode_lineage = {"warmup"};
  return out;
}

TrainResult train(const RunConfig& cfg, const Tensor& x, const Targets& targets, const std::optional<Checkpoint>& init,
                  const MetricsSink& sink) {
  cfg.validate();
  if (cfg.mode == Mode::Rescue && !init) throw ConfigError("mode rescue requires an init checkpoint");
  ModelDims dims = cfg.dims;
  dims.d = x.cols();
  TrainState st{init ? init->params : ModelParams::init(dims, cfg.decoder_uses_teacher, cfg.seed), AdamState{},
                Rng(cfg.seed ^ run_salt(cfg.mode)), 0, std::nullopt, LambdaTier::Base};
  st.params.validate();
  check_data(st.params, x);
  if (targets.rows.n() != x.rows()) {
    throw ShapeError("targets have " + std::to_string(targets.rows.n()) + " rows for " + std::to_string(x.rows()) +
                     " samples");
  }
  if (targets.rows.k() != st.params.dims.k) {
    throw ConfigError("teacher has K=" + std::to_string(targets.rows.k()) + " but the model head has K=" +
                      std::to_string(st.params.dims.k));
  }
  const Tensor trows = to_tensor(targets.rows);
  const bool align_on = cfg.mode != Mode::NoAlign;
  const bool scheduled = align_on && cfg.schedule.enabled;
  double lambda = align_on ? cfg.weights.lambda_align : 0.0;

  TrainResult out;
  auto report = [&](long step) {
    MetricsRecord r = evaluate(st.params, x, trows, targets, cfg);
    r.step = step;
    r.mode = cfg.mode;
    r.seed = cfg.seed;
    if (scheduled) {
      const auto choice = lambda_schedule(r.report.g_tau, cfg.schedule);
      st.tier = choice.tier;
      lambda = choice.lambda;
    }
    r.tier = st.tier;
    r.lambda_value = lambda;
    st.last_report = r.report;
    if (sink) sink(r);
    out.records.push_back(r);
  };

  report(0);
  BatchBuffers buf(cfg.batch_size, st.params.dims.d, st.params.dims.k, st.params.dims.l);
  for (long step = 1; step <= cfg.steps; ++step) {
    draw_batch(st.rng, x, trows, buf);
    LossWeights w = cfg.weights;
    w.lambda_align = lambda;
    const auto g = losses(st.params, {&buf.x, &buf.t, nullptr, &buf.noise}, w);
    if (!std::isfinite(g.values.total)) throw DivergedError("training loss is not finite", step);
    const auto grads = g.param_grads(g.total);
    if (!all_finite(grads)) throw DivergedError("training gradient is not finite", step);
    adam_step(st.params.tensors, grads, st.optimizer, cfg.adam);
    st.step = step;
    if (step % cfg.report_every == 0 || step == cfg.steps) report(step);
  }

  out.checkpoint.params = std::move(st.params);
  out.checkpoint.optimizer = std::move(st.optimizer);
  out.checkpoint.rng_state = st.rng.state();
  out.checkpoint.step = (init ? init->step : 0) + cfg.steps;
  if (init) out.checkpoint.mode_lineage = init->mode_lineage;
  out.checkpoint.mode_lineage.emplace_back(mode_name(cfg.mode));
  out.checkpoint.teacher_fingerprint = targets.fingerprint;
  return out;
}

DriftProbe drift_probe(const ModelParams& params, const LossInputs& batch, const LossWeights& weights, double lambda) {
  LossWeights w = weights;
  w.lambda_align = 1.0;
  const auto g = losses(params, batch, w);
  const Var l0 = add(add(g.recon, scale(g.kl_z, weights.beta_z)), scale(g.balance, weights.lambda_bal));
  const auto ga = g.param_grads(g.align);
  const auto g0 = g.param_grads(l0);
  CompensatedSum inner, sq;
  for (std::size_t p = 0; p < ga.size(); ++p) {
    for (std::size_t i = 0; i < ga[p].size(); ++i) {
      inner.add(ga[p][i] * g0[p][i]);
      sq.add(ga[p][i] * ga[p][i]);
    }
  }
  DriftProbe out;
  out.inner = inner.value();
  out.align_sq = sq.value();
  out.g_dot_pred = out.inner + lambda * out.align_sq;
  return out;
}

std::vector<double> free_logit_flow_check(const AssignmentMatrix& t, int steps, double lr,
                                          std::vector<std::vector<double>>* final_probs) {
  if (steps < 2) throw InvalidInput("free_logit_flow_check: steps must be >= 2");
  if (!(lr > 0.0)) throw InvalidInput("free_logit_flow_check: lr must be > 0");
  const std::size_t n = t.n(), k = t.k();
  std::vector<double> u(n * k, 0.0);
  std::vector<double> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  auto loss = [&] {
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) {
      const auto lp = log_softmax(std::span<const double>(u.data() + i * k, k));
      s.add(kl_row(t.row(i), lp));
    }
    return s.value();
  };
  traj.push_back(loss());
  for (int step = 0; step < steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = softmax(std::span<const double>(u.data() + i * k, k));
      const auto r = t.row(i);
      for (std::size_t c = 0; c < k; ++c) u[i * k + c] -= lr * (p[c] - r[c]);
    }
    traj.push_back(loss());
  }
  if (final_probs) {
    final_probs->clear();
    for (std::size_t i = 0; i < n; ++i)
      final_probs->push_back(softmax(std::span<const double>(u.data() + i * k, k)).vec());
  }
  return traj;
}

}  // namespace ccert
