#include "ccert/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numbers>
#include <optional>

#include "ccert/error.hpp"
#include "ccert/rng.hpp"
#include "ccert/serialize.hpp"
#include "json_util.hpp"

namespace ccert {

namespace {

constexpr int kFormatVersion = 1;
constexpr double kEmptyMass = 1e-12;

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

std::vector<double> column_variance(const Tensor& x, double floor) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> var(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) s.add(x.at(i, j));
    const double m = s.value() / static_cast<double>(n);
    CompensatedSum q;
    for (std::size_t i = 0; i < n; ++i) q.add((x.at(i, j) - m) * (x.at(i, j) - m));
    var[j] = std::max(q.value() / static_cast<double>(n), floor);
  }
  return var;
}

// log w_c + log N(x; mu_c, diag var_c) for every component.
void component_log_joint(const GmmTeacher& g, std::span<const double> x, std::vector<double>& out) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  out.resize(g.k);
  for (std::size_t c = 0; c < g.k; ++c) {
    double s = g.weights[c] > 0.0 ? std::log(g.weights[c]) : -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.d; ++j) {
      const double v = g.variance(c, j);
      const double diff = x[j] - g.mean(c, j);
      s -= 0.5 * (kLog2Pi + std::log(v) + diff * diff / v);
    }
    out[c] = s;
  }
}

}  // namespace

std::uint64_t GmmTeacher::fingerprint() const {
  Fnv1a h;
  h.u64(k);
  h.u64(d);
  for (double v : weights) h.f64(v);
  for (double v : means) h.f64(v);
  for (double v : variances) h.f64(v);
  h.u64(fit_seed);
  h.f64(loglik);
  return h.digest();
}

void GmmTeacher::validate(double var_floor) const {
  if (k < 1 || d < 1) throw InvalidInput("teacher needs k >= 1 and d >= 1");
  if (weights.size() != k || means.size() != k * d || variances.size() != k * d) {
    throw ShapeError("teacher parameter arrays do not match k=" + std::to_string(k) + ", d=" + std::to_string(d));
  }
  CompensatedSum s;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("teacher weight out of range");
    s.add(w);
  }
  if (std::abs(s.value() - 1.0) > kSimplexTol) throw InvalidInput("teacher weights do not sum to 1");
  for (double v : variances) {
    if (!(v > 0.0) || v < var_floor || !std::isfinite(v)) throw InvalidInput("teacher variance below floor");
  }
  for (double m : means) {
    if (!std::isfinite(m)) throw InvalidInput("teacher mean is not finite");
  }
}

std::vector<std::size_t> kmeanspp_indices(const Tensor& features, std::size_t k, std::uint64_t seed) {
  const std::size_t n = features.rows();
  if (k < 2 && k != 1) throw InvalidInput("kmeans++: k must be >= 1");
  if (n < k) throw InvalidInput("kmeans++: need N >= k (N=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  chosen.push_back(rng.index(n));
  taken[chosen.back()] = true;
  while (chosen.size() < k) {
    const auto last = features.row(chosen.back());
    CompensatedSum total;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = taken[i] ? 0.0 : std::min(d2[i], sq_dist(features.row(i), last));
      total.add(d2[i]);
    }
    std::size_t pick = n;
    if (total.value() > 0.0) {
      const double target = rng.uniform() * total.value();
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // round-off at the top end
        for (std::size_t i = n; i-- > 0;)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
      }
    } else {
      // Remaining points duplicate chosen centres: pick uniformly among them.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) free.push_back(i);
      pick = free[rng.index(free.size())];
    }
    chosen.push_back(pick);
    taken[pick] = true;
  }
  return chosen;
}

Tensor kmeanspp_init(const Tensor& features, std::size_t k, std::uint64_t seed) {
  const auto idx = kmeanspp_indices(features, k, seed);
  Tensor out(Shape{k, features.cols()});
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < features.cols(); ++j) out.at(c, j) = features.at(idx[c], j);
  return out;
}

GmmTeacher em_fit(const Tensor& x, std::size_t k, const EmConfig& cfg, EmTrace* trace) {
  if (x.rank() != 2 || x.cols() < 1) throw InvalidInput("em_fit: features must be N x D with D >= 1");
  const std::size_t n = x.rows(), d = x.cols();
  if (k < 1 || n < k) throw InvalidInput("em_fit: need 1 <= k <= N");

  GmmTeacher g;
  g.k = k;
  g.d = d;
  g.fit_seed = cfg.seed;
  g.weights.assign(k, 1.0 / static_cast<double>(k));
  const auto global_var = column_variance(x, cfg.var_floor);
  g.variances.resize(k * d);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j) g.variances[c * d + j] = global_var[j];
  if (k == 1) {
    g.means.assign(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(d));
  } else {
    g.means = kmeanspp_init(x, k, cfg.seed).data();
  }

  EmTrace local;
  EmTrace& tr = trace ? *trace : local;
  tr = EmTrace{};

  std::vector<double> resp(n * k);
  std::vector<double> point_ll(n);
  std::vector<double> lj;

  auto e_step = [&]() {
    CompensatedSum total;
    for (std::size_t i = 0; i < n; ++i) {
      component_log_joint(g, x.row(i), lj);
      const double lse = logsumexp(lj);
      point_ll[i] = lse;
      total.add(lse);
      for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(lj[c] - lse);
    }
    const double mean_ll = total.value() / static_cast<double>(n);
    if (!std::isfinite(mean_ll)) throw FitDegenerate("em_fit: non-finite log-likelihood");
    tr.loglik.push_back(mean_ll);
    return mean_ll;
  };

  bool stopped = false;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double ll = e_step();
    if (tr.loglik.size() >= 2 && ll - tr.loglik[tr.loglik.size() - 2] < cfg.tol) {
      tr.converged = true;
      stopped = true;
      break;
    }
    ++tr.iterations;
    // M-step.
    for (std::size_t c = 0; c < k; ++c) {
      CompensatedSum mass;
      for (std::size_t i = 0; i < n; ++i) mass.add(resp[i * k + c]);
      const double nk = mass.value();
      if (nk < kEmptyMass) {
        if (++tr.reinits > static_cast<int>(3 * k)) {
          throw FitDegenerate("em_fit: more than 3k empty-component reinitializations");
        }
        const auto worst = static_cast<std::size_t>(
            std::min_element(point_ll.begin(), point_ll.end()) - point_ll.begin());
        for (std::size_t j = 0; j < d; ++j) {
          g.means[c * d + j] = x.at(worst, j);
          g.variances[c * d + j] = global_var[j];
        }
        g.weights[c] = 1.0 / static_cast<double>(n);
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) {
        CompensatedSum m;
        for (std::size_t i = 0; i < n; ++i) m.add(resp[i * k + c] * x.at(i, j));
        const double mu = m.value() / nk;
        CompensatedSum v;
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = x.at(i, j) - mu;
          v.add(resp[i * k + c] * diff * diff);
        }
        g.means[c * d + j] = mu;
        g.variances[c * d + j] = std::max(v.value() / nk, cfg.var_floor);
      }
      g.weights[c] = nk / static_cast<double>(n);
    }
    CompensatedSum wsum;
    for (double w : g.weights) wsum.add(w);
    for (double& w : g.weights) w /= wsum.value();
  }
  if (!stopped) e_step();
  g.loglik = tr.loglik.back();
  return g;
}

Assignment assign(const GmmTeacher& teacher, std::span<const double> feature) {
  if (feature.size() != teacher.d) {
    throw ShapeError("assign: feature has " + std::to_string(feature.size()) + " dims, teacher expects " +
                     std::to_string(teacher.d));
  }
  std::vector<double> lj;
  component_log_joint(teacher, feature, lj);
  const double lse = logsumexp(lj);
  std::vector<double> logp(teacher.k), p(teacher.k);
  for (std::size_t c = 0; c < teacher.k; ++c) {
    logp[c] = lj[c] - lse;
    p[c] = std::exp(logp[c]);
  }
  return Assignment{SimplexVector(std::move(p)), std::move(logp)};
}

AssignmentMatrix assign_rows(const GmmTeacher& teacher, const Tensor& features) {
  if (features.rank() != 2 || features.cols() != teacher.d) {
    throw ShapeError("assign_rows: feature matrix " + shape_str(features.shape()) + " does not match teacher d=" +
                     std::to_string(teacher.d));
  }
  std::vector<double> flat;
  flat.reserve(features.rows() * teacher.k);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto a = assign(teacher, features.row(i));
    flat.insert(flat.end(), a.probs.vec().begin(), a.probs.vec().end());
  }
  return AssignmentMatrix(features.rows(), teacher.k, std::move(flat));
}

TeacherDiagnostics diagnostics(const AssignmentMatrix& rows, const DiagnosticThresholds& th) {
  const std::size_t n = rows.n(), k = rows.k();
  const double kd = static_cast<double>(k);
  TeacherDiagnostics out;
  out.i_t = teacher_mi(rows);

  CompensatedSum margin_sum;
  std::size_t high = 0;
  std::vector<std::size_t> hist(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = rows.row(i);
    std::size_t top = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (r[c] > r[top]) top = c;
    double second = -1.0;
    for (std::size_t c = 0; c < k; ++c)
      if (c != top) second = std::max(second, r[c]);
    const double m = r[top] - second;
    margin_sum.add(m);
    if (m > th.margin_threshold) ++high;
    ++hist[top];
  }
  out.mean_top1_margin = margin_sum.value() / static_cast<double>(n);
  out.high_margin_fraction = static_cast<double>(high) / static_cast<double>(n);

  CompensatedSum hard;
  for (std::size_t c = 0; c < k; ++c) {
    if (hist[c] == 0) continue;
    const double h = static_cast<double>(hist[c]) / static_cast<double>(n);
    hard.add(h * std::log(h * kd));
  }
  out.hard_balance_kl = std::max(0.0, hard.value());

  const auto mean = mean_assignment(rows);
  CompensatedSum soft;
  for (std::size_t c = 0; c < k; ++c)
    if (mean[c] > 0.0) soft.add(mean[c] * std::log(mean[c] * kd));
  out.soft_usage_kl = std::max(0.0, soft.value());
  out.min_component_mass = *std::min_element(mean.vec().begin(), mean.vec().end());

  if (out.i_t < th.min_i_t) out.failed_criteria.emplace_back("i_t");
  if (out.high_margin_fraction < th.min_high_margin_fraction) out.failed_criteria.emplace_back("high_margin_fraction");
  if (out.hard_balance_kl > th.max_hard_balance_kl) out.failed_criteria.emplace_back("hard_balance_kl");
  if (out.soft_usage_kl > th.max_soft_usage_over_lnk * std::log(kd)) out.failed_criteria.emplace_back("soft_usage_kl");
  if (out.min_component_mass < th.min_mass_times_k / kd) out.failed_criteria.emplace_back("min_component_mass");
  out.feasible = out.failed_criteria.empty();
  return out;
}

SearchResult search(const Tensor& features, std::span<const std::size_t> ks, std::span<const std::uint64_t> seeds,
                    const DiagnosticThresholds& th, const EmConfig& em) {
  if (ks.empty() || seeds.empty()) throw InvalidInput("search: need at least one candidate k and seed");
  struct Job {
    std::size_t k;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto k : ks)
    for (auto s : seeds) jobs.push_back({k, s});
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return std::tie(a.k, a.seed) < std::tie(b.k, b.seed); });
  jobs.erase(std::unique(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.k == b.k && a.seed == b.seed; }),
             jobs.end());

  struct Fit {
    std::optional<GmmTeacher> teacher;
    std::optional<AssignmentMatrix> rows;
    TeacherDiagnostics diag;
    std::string error;
  };
  auto run = [&](const Job& job) {
    Fit f;
    try {
      EmConfig cfg = em;
      cfg.seed = job.seed;
      f.teacher = em_fit(features, job.k, cfg);
      f.rows = assign_rows(*f.teacher, features);
      f.diag = diagnostics(*f.rows, th);
    } catch (const FitDegenerate& e) {
      f.teacher.reset();
      f.error = e.what();
    } catch (const InvalidInput& e) {
      f.teacher.reset();
      f.error = e.what();
    }
    return f;
  };

  // Each fit is independent and seed-deterministic; selection below walks
  // the results in (k, seed) order, so scheduling cannot change the outcome.
  std::vector<std::future<Fit>> futures;
  futures.reserve(jobs.size());
  for (const auto& job : jobs) futures.push_back(std::async(std::launch::async, run, job));
  std::vector<Fit> fits;
  fits.reserve(jobs.size());
  for (auto& fu : futures) fits.push_back(fu.get());

  std::vector<CandidateSummary> summaries;
  std::optional<std::size_t> best_feasible, best_any;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    CandidateSummary s{jobs[i].k, jobs[i].seed, !fits[i].teacher.has_value(), fits[i].error, fits[i].diag};
    summaries.push_back(s);
    if (!fits[i].teacher) continue;
    const double it = fits[i].diag.i_t;
    if (!best_any || it > fits[*best_any].diag.i_t) best_any = i;
    if (fits[i].diag.feasible && (!best_feasible || it > fits[*best_feasible].diag.i_t)) best_feasible = i;
  }
  if (!best_any) throw SearchFailed("search: every candidate fit was degenerate");
  const std::size_t pick = best_feasible ? *best_feasible : *best_any;
  return SearchResult{*fits[pick].teacher, fits[pick].diag, *fits[pick].rows, std::move(summaries)};
}

std::uint64_t TargetCache::content_digest() const {
  Fnv1a h;
  h.u64(teacher_fingerprint);
  h.u64(rows.n());
  h.u64(rows.k());
  for (auto id : sample_ids) h.u64(static_cast<std::uint64_t>(id));
  for (double v : rows.data()) h.f64(v);
  return h.digest();
}

TargetCache cache_targets(const GmmTeacher& teacher, const Tensor& features, std::vector<std::int64_t> sample_ids) {
  if (sample_ids.size() != features.rows()) throw InvalidInput("cache_targets: one sample id per feature row");
  for (std::size_t i = 1; i < sample_ids.size(); ++i)
    if (sample_ids[i] <= sample_ids[i - 1]) throw InvalidInput("cache_targets: sample ids must be strictly increasing");
  return TargetCache{assign_rows(teacher, features), std::move(sample_ids), teacher.fingerprint()};
}

void verify_cache(const TargetCache& cache, std::uint64_t expected) {
  if (cache.teacher_fingerprint != expected) {
    throw CacheMismatch("target cache fingerprint " + fingerprint_hex(cache.teacher_fingerprint) +
                        " does not match expected " + fingerprint_hex(expected));
  }
}

std::string fingerprint_hex(std::uint64_t fp) { return hex_u64(fp); }

namespace {

detail::json matrix_json(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  auto out = detail::json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    auto r = detail::json::array();
    for (std::size_t j = 0; j < cols; ++j) r.push_back(flat[i * cols + j]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> matrix_from_json(const detail::json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows) throw ParseError(what + ": wrong row count");
  std::vector<double> flat;
  flat.reserve(rows * cols);
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != cols) throw ParseError(what + ": wrong column count");
    for (const auto& v : r) flat.push_back(v.get<double>());
  }
  return flat;
}

void check_version(const detail::json& j, const std::string& what) {
  if (detail::require(j, "version", what).get<int>() != kFormatVersion) {
    throw ParseError(what + ": unsupported format version");
  }
}

}  // namespace

void save_teacher(const std::string& path, const GmmTeacher& t) {
  detail::json j;
  j["version"] = kFormatVersion;
  j["k"] = t.k;
  j["d"] = t.d;
  j["weights"] = t.weights;
  j["means"] = matrix_json(t.means, t.k, t.d);
  j["variances"] = matrix_json(t.variances, t.k, t.d);
  j["fit_seed"] = t.fit_seed;
  j["loglik"] = t.loglik;
  write_text_file(path, detail::dump17(j, 2) + "\n");
}

GmmTeacher load_teacher(const std::string& path) {
  const auto j = detail::parse_json_file(path);
  GmmTeacher t;
  try {
    check_version(j, path);
    t.k = detail::require(j, "k", path).get<std::size_t>();
    t.d = detail::require(j, "d", path).get<std::size_t>();
    t.weights = detail::require(j, "weights", path).get<std::vector<double>>();
    t.means = matrix_from_json(detail::require(j, "means", path), t.k, t.d, path);
    t.variances = matrix_from_json(detail::require(j, "variances", path), t.k, t.d, path);
    t.fit_seed = detail::require(j, "fit_seed", path).get<std::uint64_t>();
    t.loglik = detail::require(j, "loglik", path).get<double>();
  } catch (const detail::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  t.validate();
  return t;
}

void save_cache(const std::string& path, const TargetCache& c) {
  detail::json j;
  j["version"] = kFormatVersion;
  j["teacher_fingerprint"] = fingerprint_hex(c.teacher_fingerprint);
  j["content_digest"] = fingerprint_hex(c.content_digest());
  j["sample_ids"] = c.sample_ids;
  j["rows"] = matrix_json(c.rows.data(), c.rows.n(), c.rows.k());
  write_text_file(path, detail::dump17(j, 1) + "\n");
}

TargetCache load_cache(const std::string& path) {
  const auto j = detail::parse_json_file(path);
  try {
    check_version(j, path);
    const auto fp = parse_hex_u64(detail::require(j, "teacher_fingerprint", path).get<std::string>());
    auto ids = detail::require(j, "sample_ids", path).get<std::vector<std::int64_t>>();
    const auto& rj = detail::require(j, "rows", path);
    if (!rj.is_array() || rj.empty() || !rj.front().is_array()) throw ParseError(path + ": rows must be a matrix");
    const std::size_t n = rj.size(), k = rj.front().size();
    if (ids.size() != n) throw ParseError(path + ": sample_ids length does not match rows");
    for (std::size_t i = 1; i < ids.size(); ++i)
      if (ids[i] <= ids[i - 1]) throw ParseError(path + ": sample_ids not strictly increasing");
    TargetCache c{AssignmentMatrix(n, k, matrix_from_json(rj, n, k, path)), std::move(ids), fp};
    if (j.contains("content_digest")) {
      const auto stored = parse_hex_u64(j.at("content_digest").get<std::string>());
      if (stored != c.content_digest()) throw CacheMismatch(path + ": target cache content does not match its digest");
    }
    return c;
  } catch (const detail::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw CacheMismatch(path + ": " + e.what());
  }
}

std::string diagnostics_json(const TeacherDiagnostics& d, const DiagnosticThresholds& th) {
  detail::json j;
  j["i_t"] = d.i_t;
  j["mean_top1_margin"] = d.mean_top1_margin;
  j["high_margin_fraction"] = d.high_margin_fraction;
  j["hard_balance_kl"] = d.hard_balance_kl;
  j["soft_usage_kl"] = d.soft_usage_kl;
  j["min_component_mass"] = d.min_component_mass;
  j["feasible"] = d.feasible;
  j["failed_criteria"] = d.failed_criteria;
  j["evaluated_on"] = d.evaluated_on;
  detail::json t;
  t["margin_threshold"] = th.margin_threshold;
  t["min_high_margin_fraction"] = th.min_high_margin_fraction;
  t["min_mass_times_k"] = th.min_mass_times_k;
  t["max_soft_usage_over_lnk"] = th.max_soft_usage_over_lnk;
  t["min_i_t"] = th.min_i_t;
  t["max_hard_balance_kl"] = th.max_hard_balance_kl;
  j["thresholds"] = t;
  return detail::dump17(j, 2);
}

}  // namespace ccert
