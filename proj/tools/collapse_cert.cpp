// collapse-cert: data generation, warm-up, teacher search, training,
// certification and report merging.
//
// Exit codes: 0 ok, 1 I/O or parse failure, 2 invalid arguments or config,
// 3 teacher search failed, 4 training diverged, 5 target cache mismatch.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccert/data.hpp"
#include "ccert/error.hpp"
#include "ccert/gradcheck.hpp"
#include "ccert/metrics.hpp"
#include "ccert/rng.hpp"
#include "ccert/serialize.hpp"
#include "ccert/teacher.hpp"
#include "ccert/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ccert;

namespace {

enum Exit { kOk = 0, kIo = 1, kArgs = 2, kSearch = 3, kDiverged = 4, kCache = 5 };

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("COLLAPSE_CERT_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("COLLAPSE_CERT_SEED must be a non-negative integer");
    return v;
  }
  return 0;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

// --config file, then --set key=value pairs, then dedicated flags.
KvConfig build_config(const std::string& path, const std::vector<std::string>& sets) {
  KvConfig kv(run_config_keys());
  if (!path.empty()) kv.load(path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return kv;
}

struct TargetArgs {
  std::string teacher, features, cache;
};

struct LoadedTargets {
  Targets targets;
  Tensor x;  // data rows aligned with the targets
  std::string source;
};

Tensor select_rows(const Tensor& x, const std::vector<std::int64_t>& ids) {
  Tensor out(Shape{ids.size(), x.cols()});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= x.rows()) {
      throw CacheMismatch("cache sample id " + std::to_string(ids[r]) + " is outside the dataset");
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(static_cast<std::size_t>(ids[r]), c);
  }
  return out;
}

LoadedTargets load_targets(const TargetArgs& a, const Tensor& data) {
  if (!a.cache.empty()) {
    const TargetCache cache = load_cache(a.cache);
    if (!a.teacher.empty()) verify_cache(cache, load_teacher(a.teacher).fingerprint());
    return {Targets{cache.rows, TargetKind::FixedT0, cache.teacher_fingerprint}, select_rows(data, cache.sample_ids),
            a.cache};
  }
  if (a.teacher.empty()) throw ConfigError("targets need --cache, or --teacher together with --features");
  if (a.features.empty()) throw ConfigError("--teacher needs --features (the warm-up features the teacher reads)");
  const GmmTeacher t = load_teacher(a.teacher);
  const Dataset f = load_features(a.features);
  if (f.n() != data.rows()) {
    throw ConfigError("features have " + std::to_string(f.n()) + " rows but the data has " + std::to_string(data.rows()));
  }
  return {Targets{assign_rows(t, f.x), TargetKind::SearchedTeacher, t.fingerprint()}, data, "teacher:" + a.teacher};
}

void write_lines(const std::string& path, const std::string& text) { write_text_file(path, text); }

// ---------------------------------------------------------------- gen-data

struct GenArgs {
  MixtureSpec spec;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_gen_data(const GenArgs& a) {
  MixtureSpec spec = a.spec;
  spec.seed = resolve_seed(a.seed);
  const Dataset ds = gen_mixture(spec);
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) ensure_dir(parent.string());
  write_features(a.out, ds.x);
  write_meta(a.out + ".meta.json", spec);
  std::string labels;
  for (int c : ds.true_cluster) labels += std::to_string(c) + "\n";
  write_lines(a.out + ".labels", labels);
  std::cout << "wrote " << a.out << " (" << ds.n() << " x " << ds.d() << ")\n";
  return kOk;
}

// ------------------------------------------------------------------ warmup

struct RunArgs {
  std::string config, data, out_dir, mode, init;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  TargetArgs targets;
};

RunConfig resolve_run(const RunArgs& a, KvConfig& kv) {
  if (!a.mode.empty()) kv.set("mode", a.mode);
  if (a.steps) kv.set("steps", std::to_string(*a.steps));
  if (!a.init.empty()) kv.set("init_checkpoint", a.init);
  RunConfig cfg = run_config_from(kv);
  cfg.seed = a.seed ? *a.seed : (kv.has("seed") ? cfg.seed : resolve_seed(std::nullopt));
  return cfg;
}

int cmd_warmup(const RunArgs& a) {
  KvConfig kv = build_config(a.config, a.sets);
  RunConfig cfg = resolve_run(a, kv);
  const Dataset ds = load_features(a.data);
  ensure_dir(a.out_dir);
  const auto res = warmup(cfg, ds.x);
  save_checkpoint((fs::path(a.out_dir) / "checkpoint.json").string(), res.checkpoint);
  write_features((fs::path(a.out_dir) / "features.csv").string(), res.features);
  KvConfig resolved = to_kv(cfg);
  write_lines((fs::path(a.out_dir) / "config.resolved").string(), resolved.dump());
  std::cout << "warm-up loss " << format_double(res.loss_trace.front()) << " -> "
            << format_double(res.loss_trace.back()) << "\n";
  return kOk;
}

// ---------------------------------------------------------- teacher-search

struct SearchArgs {
  std::string features, out_teacher, out_cache, out_diag;
  std::vector<std::size_t> ks;
  std::vector<std::uint64_t> seeds{0};
  DiagnosticThresholds th;
  EmConfig em;
};

int cmd_teacher_search(const SearchArgs& a) {
  const Dataset f = load_features(a.features);
  const SearchResult r = search(f.x, a.ks, a.seeds, a.th, a.em);
  save_teacher(a.out_teacher, r.teacher);
  std::vector<std::int64_t> ids(f.n());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
  if (!a.out_cache.empty()) save_cache(a.out_cache, cache_targets(r.teacher, f.x, ids));
  const std::string diag_path = a.out_diag.empty() ? a.out_teacher + ".diagnostics.json" : a.out_diag;
  write_lines(diag_path, diagnostics_json(r.diagnostics, a.th) + "\n");

  std::ostringstream cfg;
  cfg << "features = " << a.features << "\nks = ";
  for (std::size_t i = 0; i < a.ks.size(); ++i) cfg << (i ? "," : "") << a.ks[i];
  cfg << "\nseeds = ";
  for (std::size_t i = 0; i < a.seeds.size(); ++i) cfg << (i ? "," : "") << a.seeds[i];
  cfg << "\nmargin_threshold = " << format_double(a.th.margin_threshold)
      << "\nmin_high_margin_fraction = " << format_double(a.th.min_high_margin_fraction)
      << "\nmin_mass_times_k = " << format_double(a.th.min_mass_times_k)
      << "\nmax_soft_usage_over_lnk = " << format_double(a.th.max_soft_usage_over_lnk)
      << "\nmin_i_t = " << format_double(a.th.min_i_t) << "\nmax_hard_balance_kl = " << format_double(a.th.max_hard_balance_kl)
      << "\nmax_iters = " << a.em.max_iters << "\ntol = " << format_double(a.em.tol)
      << "\nvar_floor = " << format_double(a.em.var_floor) << "\n";
  write_lines(a.out_teacher + ".config.resolved", cfg.str());

  std::cout << "selected k=" << r.teacher.k << " seed=" << r.teacher.fit_seed << " i_t=" << format_double(r.diagnostics.i_t)
            << " fingerprint=" << fingerprint_hex(r.teacher.fingerprint()) << "\n";
  if (r.diagnostics.feasible) {
    std::cout << "feasible: true\n";
  } else {
    std::cout << "feasible: false (failed: " << join(r.diagnostics.failed_criteria, ", ") << ")\n";
  }
  return kOk;
}

// ------------------------------------------------------------------- train

int cmd_train(const RunArgs& a) {
  KvConfig kv = build_config(a.config, a.sets);
  RunConfig cfg = resolve_run(a, kv);
  if (cfg.mode == Mode::FixedT0 && a.targets.cache.empty()) {
    throw ConfigError("mode fixed_t0 needs --cache with the frozen targets");
  }
  if (cfg.mode == Mode::Rescue && !cfg.init_checkpoint) throw ConfigError("mode rescue needs --init <checkpoint>");
  const Dataset ds = load_features(a.data);
  const LoadedTargets lt = load_targets(a.targets, ds.x);
  cfg.teacher_source = lt.source;

  std::optional<Checkpoint> init;
  if (cfg.init_checkpoint) {
    init = load_checkpoint(*cfg.init_checkpoint);
    if (init->teacher_fingerprint && *init->teacher_fingerprint != lt.targets.fingerprint) {
      throw CacheMismatch("targets come from teacher " + fingerprint_hex(lt.targets.fingerprint) +
                          " but the init checkpoint was trained against " + fingerprint_hex(*init->teacher_fingerprint));
    }
    cfg.dims = init->params.dims;
    cfg.decoder_uses_teacher = init->params.decoder_uses_teacher;
  }
  cfg.validate();

  ensure_dir(a.out_dir);
  KvConfig resolved = to_kv(cfg);
  write_lines((fs::path(a.out_dir) / "config.resolved").string(), resolved.dump());
  std::ofstream metrics(fs::path(a.out_dir) / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw IoError("cannot write metrics.jsonl in " + a.out_dir);
  const auto res = train(cfg, lt.x, lt.targets, init, [&](const MetricsRecord& r) {
    metrics << metrics_json(r) << "\n";
    metrics.flush();
  });
  save_checkpoint((fs::path(a.out_dir) / "checkpoint.json").string(), res.checkpoint);
  std::cout << report_json(res.records.back().report) << "\n";
  return kOk;
}

// ----------------------------------------------------------------- certify

struct CertifyArgs {
  std::string checkpoint, data;
  TargetArgs targets;
  double tau = kDefaultTau;
};

int cmd_certify(const CertifyArgs& a) {
  if (a.tau < 0.0 || !std::isfinite(a.tau)) throw InvalidInput("--tau must be >= 0");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset ds = load_features(a.data);
  const LoadedTargets lt = load_targets(a.targets, ds.x);
  const auto r = certify_model(ck.params, lt.x, lt.targets.rows, a.tau, lt.targets.kind, lt.targets.fingerprint);
  std::cout << report_json(r) << "\n";
  return kOk;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out, tau_out;
  std::vector<double> taus{0.0, 0.05, 0.1, 0.2};
};

std::string csv_num(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number()) return v.dump();
  return v.get<std::string>();
}

int cmd_report(const ReportArgs& a) {
  if (a.runs.empty()) throw IoError("report: no run directories given");
  static const std::vector<std::string> cols = {"step", "mode", "seed", "g_tau", "student_mi", "i_t", "l_align_raw",
                                                "bare_margin", "recon", "kl_z", "balance", "lambda_tier",
                                                "lambda_value", "psnr", "active_units", "target_kind"};
  std::string csv = "run";
  for (const auto& c : cols) csv += "," + c;
  csv += "\n";
  std::string tau_csv = "run,step,bare_margin,tau,g_tau\n";
  std::vector<std::string> bad;
  for (const auto& dir : a.runs) {
    const fs::path file = fs::path(dir) / "metrics.jsonl";
    const std::string label = fs::path(dir).lexically_normal().filename().string().empty()
                                  ? fs::path(dir).lexically_normal().parent_path().filename().string()
                                  : fs::path(dir).lexically_normal().filename().string();
    std::string text;
    try {
      text = read_text_file(file.string());
    } catch (const IoError&) {
      bad.push_back(dir + " (missing metrics.jsonl)");
      continue;
    }
    std::istringstream in(text);
    std::string line, body;
    std::optional<nlohmann::json> last;
    std::size_t lineno = 0;
    bool ok = true;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        body += label;
        for (const auto& c : cols) body += "," + (j.contains(c) ? csv_num(j.at(c)) : std::string());
        body += "\n";
        last = j;
      } catch (const std::exception&) {
        bad.push_back(dir + " (corrupt line " + std::to_string(lineno) + ")");
        ok = false;
        break;
      }
    }
    if (ok && !last) {
      bad.push_back(dir + " (no records)");
      ok = false;
    }
    if (!ok) continue;
    csv += body;
    try {
      CertificateReport r;
      r.i_t = last->at("i_t").get<double>();
      r.l_align_raw = last->at("l_align_raw").get<double>();
      for (const auto& [t, g] : tau_sensitivity(r, a.taus)) {
        tau_csv += label + "," + std::to_string(last->at("step").get<long>()) + "," +
                   format_double(r.i_t - r.l_align_raw) + "," + format_double(t) + "," + format_double(g) + "\n";
      }
    } catch (const std::exception&) {
      bad.push_back(dir + " (final record lacks i_t/l_align_raw)");
    }
  }
  if (!bad.empty()) {
    std::cerr << "report: unusable run directories:\n";
    for (const auto& b : bad) std::cerr << "  " << b << "\n";
    return kIo;
  }
  write_lines(a.out, csv);
  const std::string tau_path =
      a.tau_out.empty() ? (fs::path(a.out).parent_path() / (fs::path(a.out).stem().string() + "_tau.csv")).string()
                        : a.tau_out;
  write_lines(tau_path, tau_csv);
  std::cout << "wrote " << a.out << " and " << tau_path << "\n";
  return kOk;
}

// ------------------------------------------------------- gradcheck / identity

int cmd_gradcheck(std::uint64_t seed, int configs) {
  bool ok = true;
  for (const auto& r : gradcheck_suite(seed, configs)) {
    const bool pass = r.max_rel_err < 1e-5;
    ok = ok && pass;
    std::printf("%-18s cases=%-4d max_rel_err=%.3e %s\n", r.name.c_str(), r.cases, r.max_rel_err, pass ? "ok" : "FAIL");
  }
  return ok ? kOk : kIo;
}

AssignmentMatrix random_rows(Rng& rng, std::size_t n, std::size_t k, double spread) {
  std::vector<double> flat;
  flat.reserve(n * k);
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& l : logits) l = spread * rng.normal();
    const auto p = softmax(logits);
    flat.insert(flat.end(), p.vec().begin(), p.vec().end());
  }
  return AssignmentMatrix(n, k, std::move(flat));
}

int cmd_identity_check(std::uint64_t seed, int cases, int flows, int flow_steps) {
  Rng rng(seed);
  double worst_residual = 0.0, worst_min_gap = 0.0;
  for (int c = 0; c < cases; ++c) {
    const std::size_t n = 1 + rng.index(20), k = 2 + rng.index(9);
    const auto rows = random_rows(rng, n, k, 3.0 * rng.uniform());
    std::vector<double> a(k);
    for (auto& v : a) v = 0.01 + rng.uniform();
    double s = 0.0;
    for (double v : a) s += v;
    for (auto& v : a) v /= s;
    worst_residual = std::max(worst_residual, decomposition_residual(rows, SimplexVector(a)));
    worst_min_gap = std::max(worst_min_gap, teacher_mi(rows) - constant_baseline_cost(rows, SimplexVector(a)));
  }
  int monotone_fail = 0;
  double worst_final = 0.0;
  for (int f = 0; f < flows; ++f) {
    const auto rows = random_rows(rng, 1 + rng.index(64), 2 + rng.index(7), 1.0);
    const auto traj = free_logit_flow_check(rows, flow_steps, 0.1);
    for (std::size_t i = 1; i < traj.size(); ++i)
      if (traj[i] > traj[i - 1] + 1e-12) {
        ++monotone_fail;
        break;
      }
    worst_final = std::max(worst_final, traj.back());
  }
  const bool ok = worst_residual <= 1e-10 && worst_min_gap <= 1e-10 && monotone_fail == 0 && worst_final < 1e-4;
  std::printf("decomposition: cases=%d max_residual=%.3e max(I_T - cost)=%.3e\n", cases, worst_residual, worst_min_gap);
  std::printf("free-logit flow: instances=%d steps=%d non_monotone=%d max_final=%.3e\n", flows, flow_steps, monotone_fail,
              worst_final);
  std::printf("%s\n", ok ? "ok" : "FAIL");
  return ok ? kOk : kIo;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constant-student collapse certificate toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Write a synthetic Gaussian mixture as CSV plus a meta sidecar");
  g->add_option("--n", gen.spec.n, "samples")->capture_default_str();
  g->add_option("--d", gen.spec.d, "dimensions")->capture_default_str();
  g->add_option("--c", gen.spec.c, "clusters (>= 2)")->capture_default_str();
  g->add_option("--separation", gen.spec.separation, "min mean distance in noise units")->capture_default_str();
  g->add_option("--noise", gen.spec.noise_sigma, "noise standard deviation")->capture_default_str();
  g->add_option("--seed", gen.seed, "seed (falls back to COLLAPSE_CERT_SEED)");
  g->add_option("--out", gen.out, "output CSV path")->required();

  RunArgs wu;
  auto* w = app.add_subcommand("warmup", "Warm up the model with alignment off; writes checkpoint and features");
  w->add_option("--config", wu.config, "key = value config file");
  w->add_option("--set", wu.sets, "config override key=value (repeatable)");
  w->add_option("--data", wu.data, "data CSV")->required();
  w->add_option("--seed", wu.seed, "seed override");
  w->add_option("--out-dir", wu.out_dir, "output directory")->required();

  SearchArgs sa;
  auto* s = app.add_subcommand("teacher-search", "Fit candidate GMM teachers, pick one, cache targets");
  s->add_option("--features", sa.features, "feature CSV")->required();
  s->add_option("--ks", sa.ks, "candidate component counts")->required()->delimiter(',');
  s->add_option("--seeds", sa.seeds, "candidate EM seeds")->delimiter(',')->capture_default_str();
  s->add_option("--out-teacher", sa.out_teacher, "teacher JSON path")->required();
  s->add_option("--out-cache", sa.out_cache, "target cache JSON path");
  s->add_option("--out-diagnostics", sa.out_diag, "diagnostics JSON path");
  s->add_option("--margin-threshold", sa.th.margin_threshold)->capture_default_str();
  s->add_option("--min-high-margin-fraction", sa.th.min_high_margin_fraction)->capture_default_str();
  s->add_option("--min-mass-times-k", sa.th.min_mass_times_k)->capture_default_str();
  s->add_option("--max-soft-usage-over-lnk", sa.th.max_soft_usage_over_lnk)->capture_default_str();
  s->add_option("--min-i-t", sa.th.min_i_t)->capture_default_str();
  s->add_option("--max-hard-balance-kl", sa.th.max_hard_balance_kl)->capture_default_str();
  s->add_option("--max-iters", sa.em.max_iters)->capture_default_str();
  s->add_option("--tol", sa.em.tol)->capture_default_str();
  s->add_option("--var-floor", sa.em.var_floor)->capture_default_str();

  RunArgs tr;
  auto* t = app.add_subcommand("train", "Train one mode and stream certificate reports");
  t->add_option("--mode", tr.mode, "full | noalign | rescue | fixed_t0");
  t->add_option("--config", tr.config, "key = value config file");
  t->add_option("--set", tr.sets, "config override key=value (repeatable)");
  t->add_option("--data", tr.data, "data CSV")->required();
  t->add_option("--teacher", tr.targets.teacher, "teacher JSON");
  t->add_option("--features", tr.targets.features, "warm-up features the teacher is evaluated on");
  t->add_option("--cache", tr.targets.cache, "frozen target cache");
  t->add_option("--init", tr.init, "initial checkpoint (required for rescue)");
  t->add_option("--seed", tr.seed, "seed override");
  t->add_option("--steps", tr.steps, "steps override");
  t->add_option("--out-dir", tr.out_dir, "output directory")->required();

  CertifyArgs ca;
  auto* c = app.add_subcommand("certify", "Recompute the certificate of a checkpoint");
  c->add_option("--checkpoint", ca.checkpoint)->required();
  c->add_option("--data", ca.data)->required();
  c->add_option("--teacher", ca.targets.teacher);
  c->add_option("--features", ca.targets.features);
  c->add_option("--cache", ca.targets.cache);
  c->add_option("--tau", ca.tau)->capture_default_str();

  ReportArgs ra;
  auto* r = app.add_subcommand("report", "Merge run metrics into tidy CSV plus a tau-sensitivity table");
  r->add_option("--runs", ra.runs, "run directories");
  r->add_option("--out", ra.out, "output CSV")->required();
  r->add_option("--tau-out", ra.tau_out, "tau table CSV (default <out>_tau.csv)");
  r->add_option("--taus", ra.taus, "tau values")->delimiter(',');

  std::optional<std::uint64_t> gc_seed;
  int gc_configs = 100;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and the full loss");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--configs", gc_configs)->capture_default_str();

  std::optional<std::uint64_t> id_seed;
  int id_cases = 10000, id_flows = 50, id_flow_steps = 10000;
  auto* id = app.add_subcommand("identity-check", "Decomposition-identity and free-logit-flow sweeps");
  id->add_option("--seed", id_seed);
  id->add_option("--cases", id_cases)->capture_default_str();
  id->add_option("--flows", id_flows)->capture_default_str();
  id->add_option("--flow-steps", id_flow_steps, "gradient steps per flow (>= 2)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kArgs;
  }

  try {
    if (*g) return cmd_gen_data(gen);
    if (*w) return cmd_warmup(wu);
    if (*s) return cmd_teacher_search(sa);
    if (*t) return cmd_train(tr);
    if (*c) return cmd_certify(ca);
    if (*r) return cmd_report(ra);
    if (*gc) return cmd_gradcheck(resolve_seed(gc_seed), gc_configs);
    if (*id) return cmd_identity_check(resolve_seed(id_seed), id_cases, id_flows, id_flow_steps);
  } catch (const SearchFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSearch;
  } catch (const DivergedError& e) {
    std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
    return kDiverged;
  } catch (const CacheMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCache;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
