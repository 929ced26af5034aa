// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ccert/data.hpp"
#include "ccert/gradcheck.hpp"
#include "ccert/metrics.hpp"
#include "ccert/prob.hpp"
#include "ccert/serialize.hpp"
#include "ccert/teacher.hpp"
#include "ccert/trainer.hpp"

using namespace ccert;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
using Rows = std::vector<std::vector<double>>;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

Rows random_rows(std::mt19937_64& g, std::size_t n, std::size_t k, double spread) {
  std::normal_distribution<double> nd(0, spread);
  Rows rows(n, std::vector<double>(k));
  for (auto& r : rows) {
    long double z = 0;
    for (auto& v : r) {
      v = std::exp(nd(g));
      z += v;
    }
    for (auto& v : r) v = static_cast<double>(v / z);
  }
  return rows;
}

// Long-double reference for E_x KL(T_x || mean row).
long double ref_mi(const Rows& rows) {
  const std::size_t k = rows[0].size();
  std::vector<long double> bar(k, 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < k; ++c) bar[c] += r[c];
  for (auto& b : bar) b /= rows.size();
  long double s = 0;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < k; ++c)
      if (r[c] > 0) s += r[c] * (std::log(static_cast<long double>(r[c])) - std::log(bar[c]));
  return s / rows.size();
}

Tensor log_tensor(const Rows& rows) {
  Tensor t(Shape{rows.size(), rows[0].size()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) t.at(i, c) = std::log(rows[i][c]);
  return t;
}

char buf[512];
template <class... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

Outcome c1_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(1);
  std::uniform_int_distribution<int> nk(2, 12), nn(1, 64);
  double worst = 0, worst_min = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = nk(g), n = nn(g);
    const auto rows = AssignmentMatrix::from_rows(random_rows(g, n, k, 0.3 + (i % 7)));
    const auto alpha = random_rows(g, 1, k, 0.3 + (i % 5))[0];
    worst = std::max(worst, decomposition_residual(rows, SimplexVector(alpha)));
    if (i % 10 == 0) {
      const auto bar = mean_assignment(rows);
      worst_min = std::max(worst_min, std::abs(constant_baseline_cost(rows, bar) - teacher_mi(rows)));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && worst_min <= 1e-10 && secs < 5,
          fmt("max residual %.3g, minimizer gap %.3g, %.2fs", worst, worst_min, secs)};
}

// Small full-mode run used as the "trained witness" half of criterion 2.
struct TrainedWitness {
  Tensor log_probs;
  AssignmentMatrix teacher;
};

TrainedWitness quick_trained_witness(std::uint64_t seed) {
  const auto ds = gen_mixture({400, 8, 4, 10.0, 1.0, seed});
  RunConfig cfg;
  cfg.seed = seed;
  cfg.dims = {0, 2, 4, 16};
  cfg.warmup_steps = 200;
  cfg.steps = 200;
  cfg.batch_size = 64;
  cfg.report_every = 200;
  const auto wu = warmup(cfg, ds.x);
  const auto sr = search(wu.features, std::vector<std::size_t>{4}, std::vector<std::uint64_t>{0});
  const auto res = train(cfg, ds.x, {sr.rows, TargetKind::SearchedTeacher, sr.teacher.fingerprint()}, wu.checkpoint);
  const auto mu = encode(res.checkpoint.params, ds.x).mu;
  return {raw_witness(res.checkpoint.params, mu).log_probs, sr.rows};
}

Outcome c2_contrapositive() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(2);
  double worst = 1e300;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + i % 40, k = 2 + i % 9;
    const auto t = random_rows(g, n, k, 0.5 + i % 4);
    const auto s = random_rows(g, 1, k, 0.5 + i % 3)[0];
    const auto r = certify(log_tensor(Rows(n, s)), AssignmentMatrix::from_rows(t));
    worst = std::min(worst, r.l_align_raw - (r.i_t - 1e-10));
  }
  int below = 0, nonconstant = 0;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const auto w = quick_trained_witness(seed);
    const auto r = certify(w.log_probs, w.teacher);
    if (r.l_align_raw < r.i_t - 1e-9) {
      ++below;
      double dist = 0;
      for (std::size_t i = 1; i < w.log_probs.rows(); ++i)
        for (std::size_t c = 0; c < w.log_probs.cols(); ++c)
          dist = std::max(dist, std::abs(w.log_probs.at(i, c) - w.log_probs.at(0, c)));
      nonconstant += dist > 0.0;
    }
  }
  const double secs = seconds_since(t0);
  return {worst >= 0.0 && below > 0 && nonconstant == below && secs < 5,
          fmt("min(l - i_t + 1e-10) over constant fixtures %.3g; trained below-threshold %d/2, non-constant %d; %.2fs",
              worst, below, nonconstant, secs)};
}

Outcome c3_table_rows() {
  struct Row {
    double i_t, l, want;
  };
  const Row rows[] = {{0.6924, 0.0382, 0.5542}, {0.6389, 4.6051, -4.0662}, {0.7774, 0.0662, 0.6112}};
  double worst = 0;
  std::string got;
  for (const auto& r : rows) {
    const auto m = margin(r.i_t, r.l, 0.1);
    worst = std::max(worst, std::abs(m.g_tau - r.want));
    got += fmt("%.4f ", m.g_tau);
  }
  return {worst <= 1e-10, "g_tau " + got + fmt("max err %.2g", worst)};
}

Outcome c4_tau_table() {
  CertificateReport r;
  r.i_t = 0.6542;
  r.l_align_raw = 0.0;
  const auto tab = tau_sensitivity(r, {0.05, 0.10, 0.20});
  const double want[] = {0.6042, 0.5542, 0.4542};
  double worst = 0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(tab[i].second - want[i]));
  return {worst <= 1e-12, fmt("%.4f %.4f %.4f, max err %.2g", tab[0].second, tab[1].second, tab[2].second, worst)};
}

// Shared pipeline for criteria 5 and 6.
struct SeedRun {
  Dataset data;
  WarmupResult wu;
  SearchResult teacher;
};

SeedRun prepare(std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  MixtureSpec ms;  // n 2000, d 16, c 8
  ms.seed = seed;
  auto data = gen_mixture(ms);
  auto wu = warmup(cfg, data.x);
  auto teacher = search(wu.features, std::vector<std::size_t>{8}, std::vector<std::uint64_t>{0, 1, 2});
  return {std::move(data), std::move(wu), std::move(teacher)};
}

struct Triple {
  CertificateReport full, noalign, rescue;
  std::vector<std::string> stream;  // full-run metrics lines
};

Triple run_triple(const SeedRun& s, std::uint64_t seed, const Targets& tg, Mode aligned) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.report_every = 500;
  Triple out;
  cfg.mode = aligned;
  const auto full = train(cfg, s.data.x, tg, s.wu.checkpoint, [&](const MetricsRecord& r) {
    out.stream.push_back(metrics_json(r));
  });
  out.full = full.records.back().report;
  cfg.mode = Mode::NoAlign;
  const auto na = train(cfg, s.data.x, tg, s.wu.checkpoint);
  out.noalign = na.records.back().report;
  cfg.mode = Mode::Rescue;
  cfg.init_checkpoint = "noalign";
  out.rescue = train(cfg, s.data.x, tg, na.checkpoint).records.back().report;
  return out;
}

std::vector<SeedRun> g_runs;

Outcome c5_prevention_collapse_rescue() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string d;
  const double lnk = std::log(8.0);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    g_runs.push_back(prepare(seed));
    const auto& s = g_runs.back();
    const Targets tg{s.teacher.rows, TargetKind::SearchedTeacher, s.teacher.teacher.fingerprint()};
    const auto t = run_triple(s, seed, tg, Mode::Full);
    const bool pass = t.full.g_tau > 0 && t.noalign.g_tau < 0 && t.noalign.student_mi < 1e-3 &&
                      std::abs(t.noalign.l_align_raw - lnk) <= 0.15 * lnk && t.rescue.g_tau > 0;
    ok = ok && pass;
    d += fmt("[seed %d: full %.4f, noalign %.4f (mi %.1e, L %.4f), rescue %.4f] ", static_cast<int>(seed),
             t.full.g_tau, t.noalign.g_tau, t.noalign.student_mi, t.noalign.l_align_raw, t.rescue.g_tau);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 600, d + fmt("%.1fs", secs)};
}

GmmTeacher mutated(GmmTeacher t) {
  for (auto& m : t.means) m += 0.5;
  for (auto& w : t.weights) w = 1.0 / static_cast<double>(t.k);
  return t;
}

Outcome c6_fixed_t0() {
  const auto t0 = Clock::now();
  const auto dir = fs::temp_directory_path() / "ccert_acceptance";
  fs::create_directories(dir);
  bool ok = g_runs.size() == 3;
  std::string d;
  for (std::uint64_t seed = 0; ok && seed < 3; ++seed) {
    const auto& s = g_runs[seed];
    const auto tpath = (dir / fmt("teacher%d.json", static_cast<int>(seed))).string();
    const auto cpath = (dir / fmt("cache%d.json", static_cast<int>(seed))).string();
    std::vector<std::int64_t> ids(s.wu.features.rows());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
    save_teacher(tpath, s.teacher.teacher);
    save_cache(cpath, cache_targets(s.teacher.teacher, s.wu.features, ids));

    auto targets_from_disk = [&] {
      const auto cache = load_cache(cpath);
      return Targets{cache.rows, TargetKind::FixedT0, cache.teacher_fingerprint};
    };
    const auto before = run_triple(s, seed, targets_from_disk(), Mode::FixedT0);

    // Rewrite the teacher file after caching; the cache is the only target source.
    save_teacher(tpath, mutated(load_teacher(tpath)));
    const auto after = run_triple(s, seed, targets_from_disk(), Mode::FixedT0);
    const bool equal = before.stream == after.stream && before.noalign.g_tau == after.noalign.g_tau &&
                       before.rescue.g_tau == after.rescue.g_tau;
    const bool kinds = before.full.target_kind == TargetKind::FixedT0;
    const bool signs = before.full.g_tau > 0 && before.noalign.g_tau < 0 && before.noalign.student_mi < 1e-3 &&
                       before.rescue.g_tau > 0;
    ok = ok && equal && kinds && signs;
    d += fmt("[seed %d: fixed_t0 %.4f, noalign %.4f, rescue %.4f, bit-equal after mutation %s] ",
             static_cast<int>(seed), before.full.g_tau, before.noalign.g_tau, before.rescue.g_tau,
             equal ? "yes" : "no");
  }
  return {ok, d + fmt("%.1fs", seconds_since(t0))};
}

Outcome c7_gradcheck() {
  const auto t0 = Clock::now();
  const auto res = gradcheck_suite(7, 100);
  double worst = 0;
  std::string name;
  bool has_loss = false;
  for (const auto& r : res) {
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      name = r.name;
    }
    has_loss = has_loss || r.name == "four_term_loss";
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && has_loss && secs < 30,
          fmt("%zu checks, max rel-err %.3g (%s), %.2fs", res.size(), worst, name.c_str(), secs)};
}

Outcome c8_rescue_direction() {
  std::mt19937_64 g(8);
  double worst_grad = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rep % 30, k = 2 + rep % 8;
    const auto t = random_rows(g, n, k, 1.5);
    std::normal_distribution<double> nd(0, 2);
    std::vector<double> row(k);
    for (auto& v : row) v = nd(g);
    Tensor logits(Shape{n, k});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) logits.at(i, c) = row[c];
    Tape tape;
    const Var l = tape.leaf(logits);
    Tensor tt(Shape{n, k});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) tt.at(i, c) = t[i][c];
    const Tensor grad = tape.backward(align_loss(log_softmax_rows(l), tt))[l];
    long double mx = *std::max_element(row.begin(), row.end()), z = 0;
    for (double v : row) z += std::exp(v - mx);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) {
        const double s = static_cast<double>(std::exp(row[c] - mx) / z);
        worst_grad = std::max(worst_grad, std::abs(grad.at(i, c) - (s - t[i][c]) / static_cast<double>(n)));
      }
  }

  int probes = 0, positive = 0;
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t r = static_cast<std::size_t>(rep);
    const ModelDims dims{3 + r % 4, 1 + r % 3, 2 + r % 4, 4 + r % 5};
    const auto p = ModelParams::init(dims, rep % 2 == 0, 1000 + rep);
    const std::size_t n = 4 + rep % 9;
    std::normal_distribution<double> nd(0, 1);
    Tensor x(Shape{n, dims.d}), noise(Shape{n, dims.l}), tt(Shape{n, dims.k});
    for (auto& v : x.data()) v = nd(g);
    for (auto& v : noise.data()) v = nd(g);
    const auto t = random_rows(g, n, dims.k, 1.5);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < dims.k; ++c) tt.at(i, c) = t[i][c];
    const LossInputs in{&x, &tt, nullptr, &noise};
    const LossWeights w{u(g), u(g), u(g)};
    const auto base = drift_probe(p, in, w, 0.0);
    if (!(base.align_sq > 0)) continue;
    const double lam = std::max(0.0, -base.inner) / base.align_sq * (1.0 + u(g)) + 1e-6;
    ++probes;
    positive += drift_probe(p, in, w, lam).g_dot_pred > 0.0;
  }
  return {worst_grad <= 1e-10 && probes == 100 && positive == probes,
          fmt("max |grad - (S-T)/N| %.3g; drift probe positive %d/%d", worst_grad, positive, probes)};
}

// Teachers are softmax of standard-normal logits. The slowest direction of the
// flow decays at a rate set by the smallest teacher probability; at 5000 steps
// a few of these instances still sit just above 1e-4.
constexpr int kFlowSteps = 10000;

Outcome c9_free_flow() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(9);
  std::uniform_int_distribution<int> nn(1, 64), nk(2, 8);
  double worst_up = 0, worst_final = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto rows = AssignmentMatrix::from_rows(random_rows(g, nn(g), nk(g), 1.0));
    const auto traj = free_logit_flow_check(rows, kFlowSteps, 0.1);
    for (std::size_t s = 1; s < traj.size(); ++s) worst_up = std::max(worst_up, traj[s] - traj[s - 1]);
    worst_final = std::max(worst_final, traj.back());
  }
  const double secs = seconds_since(t0);
  return {worst_up <= 1e-12 && worst_final < 1e-4 && secs < 20,
          fmt("%d steps: max step increase %.3g, worst final %.3g, %.2fs", kFlowSteps, worst_up, worst_final, secs)};
}

Outcome c10_em_teacher() {
  const std::size_t n = 8000, d = 4, c = 4;
  const double sep = 10.0;
  const auto ds = gen_mixture({n, d, c, sep, 1.0, 10});
  // Axis-frame means a*e_k shifted to zero centroid.
  const double a = sep / std::sqrt(2.0);
  const auto r = search(ds.x, std::vector<std::size_t>{c}, std::vector<std::uint64_t>{0});
  double worst = 0;
  for (std::size_t q = 0; q < c; ++q) {
    double best = 1e300;
    for (std::size_t k = 0; k < c; ++k) {
      double dist = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double truth = (j == k ? a : 0.0) - (j < c ? a / c : 0.0);
        dist += (r.teacher.mean(q, j) - truth) * (r.teacher.mean(q, j) - truth);
      }
      best = std::min(best, std::sqrt(dist));
    }
    worst = std::max(worst, best);
  }

  std::mt19937_64 g(2);
  std::normal_distribution<double> nd(0, 1);
  Tensor blob(Shape{2000, 4});
  for (auto& v : blob.data()) v = nd(g);
  const auto stress = search(blob, std::vector<std::size_t>{4}, std::vector<std::uint64_t>{2});
  std::string failed;
  for (const auto& f : stress.diagnostics.failed_criteria) failed += (failed.empty() ? "" : ",") + f;
  return {worst < 0.1 && r.diagnostics.feasible && !stress.diagnostics.feasible && !failed.empty(),
          fmt("max mean error %.4f, separated feasible %s; single cluster k=4 feasible %s (failed: %s)", worst,
              r.diagnostics.feasible ? "true" : "false", stress.diagnostics.feasible ? "true" : "false",
              failed.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"identity suite", c1_identity},
      {"constant-witness contrapositive", c2_contrapositive},
      {"margin arithmetic", c3_table_rows},
      {"tau sensitivity", c4_tau_table},
      {"prevention-collapse-rescue", c5_prevention_collapse_rescue},
      {"fixed-T0 protocol", c6_fixed_t0},
      {"gradient correctness", c7_gradcheck},
      {"rescue direction and drift probe", c8_rescue_direction},
      {"free-logit flow", c9_free_flow},
      {"EM teacher", c10_em_teacher},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed;
}
