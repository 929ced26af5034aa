#include "ccert/vae.hpp"

#include <cmath>

#include "ccert/error.hpp"
#include "ccert/serialize.hpp"
#include "json_util.hpp"

namespace ccert {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr double kLogvarMin = -10.0;
constexpr double kLogvarMax = 10.0;

constexpr std::array<const char*, kParamCount> kNames = {
    "enc.w1", "enc.b1", "enc.w2",  "enc.b2",  "enc.w_mu", "enc.b_mu", "enc.w_logvar", "enc.b_logvar", "dec.w1",
    "dec.b1", "dec.w2", "dec.b2",  "dec.w_out", "dec.b_out", "head.w1", "head.b1", "head.w_out", "head.b_out"};

std::array<Shape, kParamCount> expected_shapes(const ModelDims& m, bool uses_teacher) {
  const std::size_t dec_in = m.l + (uses_teacher ? m.k : 0);
  return {Shape{m.d, m.h},  Shape{1, m.h}, Shape{m.h, m.h}, Shape{1, m.h}, Shape{m.h, m.l}, Shape{1, m.l},
          Shape{m.h, m.l},  Shape{1, m.l}, Shape{dec_in, m.h}, Shape{1, m.h}, Shape{m.h, m.h}, Shape{1, m.h},
          Shape{m.h, m.d},  Shape{1, m.d}, Shape{m.l, m.h}, Shape{1, m.h}, Shape{m.h, m.k}, Shape{1, m.k}};
}

Var dense(Var in, Var w, Var b) { return bias_add(matmul(in, w), b); }

}  // namespace

const char* param_name(std::size_t slot) { return kNames.at(slot); }

ModelParams ModelParams::init(const ModelDims& dims, bool uses_teacher, std::uint64_t seed) {
  if (dims.d < 1 || dims.l < 1 || dims.h < 1 || dims.k < 2) throw ConfigError("model dims need D, L, H >= 1 and K >= 2");
  ModelParams p;
  p.dims = dims;
  p.decoder_uses_teacher = uses_teacher;
  Rng rng(seed);
  const auto shapes = expected_shapes(dims, uses_teacher);
  for (const auto& s : shapes) {
    Tensor t(s);
    if (s[0] > 1) {  // weights; biases stay zero
      const double sd = 1.0 / std::sqrt(static_cast<double>(s[0]));
      for (auto& v : t.data()) v = sd * rng.normal();
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

void ModelParams::validate() const {
  if (tensors.size() != kParamCount) throw ShapeError("model has " + std::to_string(tensors.size()) + " tensors");
  const auto shapes = expected_shapes(dims, decoder_uses_teacher);
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (tensors[i].shape() != shapes[i]) {
      throw ShapeError(std::string(kNames[i]) + ": shape " + shape_str(tensors[i].shape()) + ", expected " +
                       shape_str(shapes[i]));
    }
  }
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

Bound bind(Tape& tape, const ModelParams& params, bool trainable) {
  Bound b;
  b.p.reserve(params.tensors.size());
  for (const auto& t : params.tensors) b.p.push_back(trainable ? tape.leaf(t) : tape.constant(t));
  return b;
}

EncodedVars encode(const Bound& b, const ModelParams& params, Var x) {
  const auto& xs = x.tape->value(x).shape();
  if (xs.size() != 2 || xs[1] != params.dims.d) {
    throw ShapeError("encode: input " + shape_str(xs) + ", expected N x " + std::to_string(params.dims.d));
  }
  const Var h1 = tanh(dense(x, b.p[kEncW1], b.p[kEncB1]));
  const Var h2 = tanh(dense(h1, b.p[kEncW2], b.p[kEncB2]));
  const Var mu = dense(h2, b.p[kEncWMu], b.p[kEncBMu]);
  const Var lv = clamp(dense(h2, b.p[kEncWLv], b.p[kEncBLv]), kLogvarMin, kLogvarMax);
  return {mu, lv};
}

Var decode(const Bound& b, const ModelParams& params, Var z, std::optional<Var> teacher_rows) {
  Var in = z;
  if (params.decoder_uses_teacher) {
    if (!teacher_rows) throw ConfigError("decode: the decoder is teacher-conditioned but no teacher rows were given");
    in = concat_cols(z, *teacher_rows);
  }
  const Var h1 = tanh(dense(in, b.p[kDecW1], b.p[kDecB1]));
  const Var h2 = tanh(dense(h1, b.p[kDecW2], b.p[kDecB2]));
  return dense(h2, b.p[kDecWOut], b.p[kDecBOut]);
}

Var witness_logits(const Bound& b, const ModelParams& params, Var z) {
  const auto& zs = z.tape->value(z).shape();
  if (zs.size() != 2 || zs[1] != params.dims.l) {
    throw ShapeError("raw witness: z " + shape_str(zs) + ", expected N x " + std::to_string(params.dims.l));
  }
  const Var h = tanh(dense(z, b.p[kHeadW1], b.p[kHeadB1]));
  return dense(h, b.p[kHeadWOut], b.p[kHeadBOut]);
}

Var align_loss(Var log_probs, const Tensor& teacher) {
  Tape& tape = *log_probs.tape;
  const auto& ls = tape.value(log_probs).shape();
  if (teacher.shape() != ls) {
    throw ShapeError("align: teacher " + shape_str(teacher.shape()) + " vs witness " + shape_str(ls));
  }
  const double n = static_cast<double>(ls[0]);
  CompensatedSum neg_ent;
  for (double t : teacher.data())
    if (t > 0.0) neg_ent.add(t * std::log(t));
  const Var cross = sum(mul(tape.constant(teacher), log_probs));
  return add_scalar(scale(cross, -1.0 / n), neg_ent.value() / n);
}

Var balance_loss(Var log_probs) {
  const double k = static_cast<double>(log_probs.tape->value(log_probs).cols());
  const Var sbar = mean_rows(exp(log_probs));
  return add_scalar(sum(mul(sbar, log(sbar))), std::log(k));
}

Var kl_z_loss(Var mu, Var logvar) {
  const double n = static_cast<double>(mu.tape->value(mu).rows());
  const Var inner = sub(add(square(mu), exp(logvar)), add_scalar(logvar, 1.0));
  return scale(sum(inner), 0.5 / n);
}

Var recon_loss(Var xhat, Var x) {
  const double n = static_cast<double>(x.tape->value(x).rows());
  return scale(sum(square(sub(xhat, x))), 1.0 / n);
}

Encoded encode(const ModelParams& params, const Tensor& x) {
  Tape tape;
  const Bound b = bind(tape, params, false);
  const auto e = encode(b, params, tape.constant(x));
  return {tape.value(e.mu), tape.value(e.logvar)};
}

Tensor decode(const ModelParams& params, const Tensor& z, const Tensor* teacher_rows) {
  Tape tape;
  const Bound b = bind(tape, params, false);
  std::optional<Var> t;
  if (params.decoder_uses_teacher && teacher_rows) t = tape.constant(*teacher_rows);
  return tape.value(decode(b, params, tape.constant(z), t));
}

Witness raw_witness(const ModelParams& params, const Tensor& z) {
  Tape tape;
  const Bound b = bind(tape, params, false);
  const Var logits = witness_logits(b, params, tape.constant(z));
  const Var lp = log_softmax_rows(logits);
  Tensor log_probs = tape.value(lp);
  std::vector<double> probs(log_probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(log_probs[i]);
  return {AssignmentMatrix(log_probs.rows(), log_probs.cols(), std::move(probs)), tape.value(logits),
          std::move(log_probs)};
}

std::vector<Tensor> LossGraph::param_grads(Var loss) const {
  const Gradients g = tape->backward(loss);
  std::vector<Tensor> out;
  out.reserve(bound.p.size());
  for (Var v : bound.p) out.push_back(g[v]);
  return out;
}

LossGraph losses(const ModelParams& params, const LossInputs& in, const LossWeights& w) {
  if (!in.x || !in.teacher_probs || !in.noise) throw InvalidInput("losses: x, teacher_probs and noise are required");
  for (double v : {w.beta_z, w.lambda_align, w.lambda_bal}) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("losses: weights must be finite and >= 0");
  }
  const std::size_t n = in.x->rows();
  if (in.teacher_probs->rank() != 2 || in.teacher_probs->rows() != n || in.teacher_probs->cols() != params.dims.k) {
    throw ShapeError("losses: teacher rows " + shape_str(in.teacher_probs->shape()) + " for batch of " +
                     std::to_string(n) + " with K=" + std::to_string(params.dims.k));
  }
  if (in.noise->shape() != Shape{n, params.dims.l}) {
    throw ShapeError("losses: noise " + shape_str(in.noise->shape()) + ", expected " +
                     shape_str(Shape{n, params.dims.l}));
  }
  LossGraph g;
  g.tape = std::make_unique<Tape>();
  Tape& tape = *g.tape;
  g.bound = bind(tape, params, true);
  const Var x = tape.constant(*in.x);
  const auto enc = encode(g.bound, params, x);
  g.mu = enc.mu;
  g.logvar = enc.logvar;
  const Var z = gaussian_reparam(enc.mu, enc.logvar, *in.noise);
  std::optional<Var> dec_rows;
  if (params.decoder_uses_teacher) {
    const Tensor* rows = in.decoder_rows ? in.decoder_rows : in.teacher_probs;
    if (rows->shape() != in.teacher_probs->shape()) throw ShapeError("losses: decoder rows shape mismatch");
    dec_rows = tape.constant(*rows);
  }
  const Var xhat = decode(g.bound, params, z, dec_rows);
  g.logits = witness_logits(g.bound, params, z);
  const Var lp = log_softmax_rows(g.logits);

  g.recon = recon_loss(xhat, x);
  g.kl_z = kl_z_loss(enc.mu, enc.logvar);
  g.align = align_loss(lp, *in.teacher_probs);
  g.balance = balance_loss(lp);
  g.total = add(add(g.recon, scale(g.kl_z, w.beta_z)),
                add(scale(g.align, w.lambda_align), scale(g.balance, w.lambda_bal)));

  g.values.recon = tape.value(g.recon).item();
  g.values.kl_z = tape.value(g.kl_z).item();
  g.values.align_raw = tape.value(g.align).item();
  g.values.balance = tape.value(g.balance).item();
  g.values.total = tape.value(g.total).item();
  g.values.weights = w;
  return g;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  c.params.validate();
  using detail::json;
  json j;
  j["version"] = kCheckpointVersion;
  j["dims"] = {{"d", c.params.dims.d}, {"l", c.params.dims.l}, {"k", c.params.dims.k}, {"h", c.params.dims.h}};
  j["decoder_uses_teacher"] = c.params.decoder_uses_teacher;
  auto tensor_json = [](const Tensor& t) {
    return json{{"shape", t.shape()}, {"data", encode_f64_base64(t.data())}};
  };
  json tensors = json::object();
  for (std::size_t i = 0; i < kParamCount; ++i) tensors[kNames[i]] = tensor_json(c.params.tensors[i]);
  j["tensors"] = tensors;
  json m = json::array(), v = json::array();
  for (const auto& t : c.optimizer.m) m.push_back(tensor_json(t));
  for (const auto& t : c.optimizer.v) v.push_back(tensor_json(t));
  j["optimizer_state"] = {{"t", c.optimizer.t}, {"m", m}, {"v", v}};
  json rng = json::array();
  for (auto w : c.rng_state) rng.push_back(hex_u64(w));
  j["rng_state"] = rng;
  j["step"] = c.step;
  j["mode_lineage"] = c.mode_lineage;
  j["teacher_fingerprint"] = c.teacher_fingerprint ? json(hex_u64(*c.teacher_fingerprint)) : json(nullptr);
  write_text_file(path, detail::dump17(j, 1) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  using detail::json;
  const auto j = detail::parse_json_file(path);
  Checkpoint c;
  try {
    if (detail::require(j, "version", path).get<int>() != kCheckpointVersion) {
      throw ParseError(path + ": unsupported checkpoint version");
    }
    const auto& d = detail::require(j, "dims", path);
    c.params.dims = {d.at("d").get<std::size_t>(), d.at("l").get<std::size_t>(), d.at("k").get<std::size_t>(),
                     d.at("h").get<std::size_t>()};
    c.params.decoder_uses_teacher = detail::require(j, "decoder_uses_teacher", path).get<bool>();
    auto tensor_from = [&](const json& t) {
      auto data = decode_f64_base64(t.at("data").get<std::string>());
      return Tensor(t.at("shape").get<Shape>(), std::move(data));
    };
    const auto& ts = detail::require(j, "tensors", path);
    for (std::size_t i = 0; i < kParamCount; ++i) {
      if (!ts.contains(kNames[i])) throw ParseError(path + ": missing tensor " + kNames[i]);
      c.params.tensors.push_back(tensor_from(ts.at(kNames[i])));
    }
    const auto& opt = detail::require(j, "optimizer_state", path);
    c.optimizer.t = opt.at("t").get<long>();
    for (const auto& t : opt.at("m")) c.optimizer.m.push_back(tensor_from(t));
    for (const auto& t : opt.at("v")) c.optimizer.v.push_back(tensor_from(t));
    const auto& rng = detail::require(j, "rng_state", path);
    if (!rng.is_array() || rng.size() != 4) throw ParseError(path + ": rng_state must hold 4 words");
    for (std::size_t i = 0; i < 4; ++i) c.rng_state[i] = parse_hex_u64(rng[i].get<std::string>());
    c.step = detail::require(j, "step", path).get<long>();
    c.mode_lineage = detail::require(j, "mode_lineage", path).get<std::vector<std::string>>();
    if (j.contains("teacher_fingerprint") && !j.at("teacher_fingerprint").is_null()) {
      c.teacher_fingerprint = parse_hex_u64(j.at("teacher_fingerprint").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    c.params.validate();
  } catch (const ShapeError& e) {
    throw ParseError(path + ": " + e.what());
  }
  return c;
}

}  // namespace ccert
