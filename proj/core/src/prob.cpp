#include "ccert/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ccert/error.hpp"

namespace ccert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_kl(double v) {
  if (v < 0.0) {
    if (v < -kSimplexTol) {
      throw ConsistencyError("KL evaluated to " + std::to_string(v) + " (below round-off budget)");
    }
    return 0.0;
  }
  return v;
}

std::vector<double> log_of(std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) out[c] = p[c] > 0.0 ? std::log(p[c]) : -kInf;
  return out;
}

}  // namespace

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

void check_simplex(std::span<const double> p) {
  if (p.size() < 2) throw InvalidInput("simplex vector needs K >= 2, got " + std::to_string(p.size()));
  CompensatedSum s;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidInput("simplex entry out of range: " + std::to_string(v));
    }
    s.add(v);
  }
  if (std::abs(s.value() - 1.0) > kSimplexTol) {
    throw InvalidInput("simplex row sums to " + std::to_string(s.value()));
  }
}

SimplexVector::SimplexVector(std::vector<double> probs) : p_(std::move(probs)) { check_simplex(p_); }

SimplexVector SimplexVector::uniform(std::size_t k) {
  return SimplexVector(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

AssignmentMatrix::AssignmentMatrix(std::size_t n, std::size_t k, std::vector<double> data)
    : n_(n), k_(k), data_(std::move(data)) {
  if (n_ < 1) throw InvalidInput("assignment matrix needs N >= 1");
  if (k_ < 2) throw InvalidInput("assignment matrix needs K >= 2");
  if (data_.size() != n_ * k_) {
    throw ShapeError("assignment matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                     std::to_string(n_) + "x" + std::to_string(k_));
  }
  for (std::size_t i = 0; i < n_; ++i) check_simplex(row(i));
}

AssignmentMatrix AssignmentMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidInput("assignment matrix needs N >= 1");
  const std::size_t k = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * k);
  for (const auto& r : rows) {
    if (r.size() != k) throw ShapeError("ragged assignment rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return AssignmentMatrix(rows.size(), k, std::move(flat));
}

double logsumexp(std::span<const double> v) {
  double mx = -kInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == -kInf) return -kInf;
  CompensatedSum s;
  for (double x : v) s.add(std::exp(x - mx));
  return mx + std::log(s.value());
}

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.size() < 2) throw InvalidInput("softmax needs K >= 2");
  for (double l : logits) {
    if (!std::isfinite(l)) throw InvalidInput("non-finite logit");
  }
  const double lse = logsumexp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out[c] = logits[c] - lse;
  return out;
}

SimplexVector softmax(std::span<const double> logits) {
  auto lp = log_softmax(logits);
  for (double& v : lp) v = std::exp(v);
  return SimplexVector(std::move(lp));
}

double kl_row(std::span<const double> p, std::span<const double> q_log) {
  CompensatedSum s;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] <= 0.0) continue;
    if (q_log[c] == -kInf) return kInf;
    s.add(p[c] * (std::log(p[c]) - q_log[c]));
  }
  return clamp_kl(s.value());
}

double kl(const SimplexVector& p, std::span<const double> q_log) {
  if (q_log.size() != p.size()) {
    throw ShapeError("kl: p has " + std::to_string(p.size()) + " entries, q_log has " +
                     std::to_string(q_log.size()));
  }
  for (double q : q_log) {
    if (std::isnan(q) || q == kInf) throw InvalidInput("kl: invalid log-probability");
  }
  if (std::abs(logsumexp(q_log)) > 1e-6) throw InvalidInput("kl: q_log is not normalized");
  return kl_row(p.probs(), q_log);
}

double entropy(const SimplexVector& p) {
  CompensatedSum s;
  for (double v : p.probs()) {
    if (v > 0.0) s.add(-v * std::log(v));
  }
  return std::max(0.0, s.value());
}

SimplexVector mean_assignment(const AssignmentMatrix& rows) {
  const std::size_t k = rows.k();
  std::vector<CompensatedSum> acc(k);
  for (std::size_t i = 0; i < rows.n(); ++i) {
    const auto r = rows.row(i);
    for (std::size_t c = 0; c < k; ++c) acc[c].add(r[c]);
  }
  std::vector<double> mean(k);
  const double inv_n = 1.0 / static_cast<double>(rows.n());
  for (std::size_t c = 0; c < k; ++c) mean[c] = acc[c].value() * inv_n;
  return SimplexVector(std::move(mean));
}

double constant_baseline_cost(const AssignmentMatrix& rows, const SimplexVector& alpha) {
  if (alpha.size() != rows.k()) throw ShapeError("alpha length does not match K");
  const auto alpha_log = log_of(alpha.probs());
  CompensatedSum s;
  for (std::size_t i = 0; i < rows.n(); ++i) {
    const double v = kl_row(rows.row(i), alpha_log);
    if (v == kInf) return kInf;
    s.add(v);
  }
  return s.value() / static_cast<double>(rows.n());
}

double teacher_mi(const AssignmentMatrix& rows) {
  const auto mean = mean_assignment(rows);
  const double v = constant_baseline_cost(rows, mean);
  return std::clamp(v, 0.0, std::log(static_cast<double>(rows.k())));
}

double decomposition_residual(const AssignmentMatrix& rows, const SimplexVector& alpha) {
  for (double a : alpha.probs()) {
    if (!(a > 0.0)) throw InvalidInput("decomposition_residual needs strictly positive alpha");
  }
  const double cost = constant_baseline_cost(rows, alpha);
  const auto mean = mean_assignment(rows);
  const double gap = kl_row(mean.probs(), log_of(alpha.probs()));
  return std::abs(cost - teacher_mi(rows) - gap);
}

MarginReport margin(double i_t, double l_align_raw, double tau) {
  if (!(tau >= 0.0)) throw InvalidInput("tau must be >= 0");
  MarginReport r;
  r.i_t = i_t;
  r.l_align_raw = l_align_raw;
  r.tau = tau;
  r.bare_margin = i_t - l_align_raw;
  r.g_tau = r.bare_margin - tau;
  return r;
}

}  // namespace ccert
