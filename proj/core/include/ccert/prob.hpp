#pragma once

// Exact arithmetic on the probability simplex: softmax, KL, entropy, the
// teacher mutual information and the constant-baseline decomposition that
// the collapse certificate rests on. All quantities are in nats.

#include <cstddef>
#include <span>
#include <vector>

namespace ccert {

inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kDefaultTau = 0.1;

// Fixed-order Kahan-Babuska (Neumaier) accumulator. Reports are required to be
// bit-reproducible, so every reduction in the library goes through this.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// A length-K probability vector. Construction validates the invariants.
class SimplexVector {
 public:
  explicit SimplexVector(std::vector<double> probs);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t c) const { return p_[c]; }
  std::span<const double> probs() const noexcept { return p_; }
  const std::vector<double>& vec() const noexcept { return p_; }

  static SimplexVector uniform(std::size_t k);

 private:
  std::vector<double> p_;
};

// N rows on the K-simplex, stored row-major. N >= 1, K >= 2.
class AssignmentMatrix {
 public:
  AssignmentMatrix(std::size_t n, std::size_t k, std::vector<double> data);
  static AssignmentMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * k_, k_}; }
  const std::vector<double>& data() const noexcept { return data_; }

 private:
  std::size_t n_;
  std::size_t k_;
  std::vector<double> data_;
};

struct MarginReport {
  double i_t = 0.0;
  double l_align_raw = 0.0;
  double bare_margin = 0.0;
  double tau = kDefaultTau;
  double g_tau = 0.0;
};

// Validates the simplex invariants on a raw row; throws InvalidInput.
void check_simplex(std::span<const double> p);

SimplexVector softmax(std::span<const double> logits);

// log_softmax(l)_c = l_c - max - log sum exp(l - max).
std::vector<double> log_softmax(std::span<const double> logits);

// logsumexp with max subtraction; -inf for an all -inf input.
double logsumexp(std::span<const double> v);

// KL(p || q) against log-probabilities q_log, with 0 ln 0 = 0. Returns +inf if
// p puts mass where q_log is -inf. Round-off negatives above -1e-9 clamp to 0;
// anything lower throws ConsistencyError.
double kl(const SimplexVector& p, std::span<const double> q_log);

// Unvalidated row kernel behind kl(); p and q_log must have equal length.
double kl_row(std::span<const double> p, std::span<const double> q_log);

double entropy(const SimplexVector& p);

SimplexVector mean_assignment(const AssignmentMatrix& rows);

// I_T = E_x KL(T_x || mean row), clamped into [0, ln K].
double teacher_mi(const AssignmentMatrix& rows);

// E_x KL(T_x || alpha), evaluated directly rather than through the identity.
double constant_baseline_cost(const AssignmentMatrix& rows, const SimplexVector& alpha);

// |E_x KL(T_x||alpha) - I_T - KL(mean||alpha)|; alpha must be strictly positive.
double decomposition_residual(const AssignmentMatrix& rows, const SimplexVector& alpha);

MarginReport margin(double i_t, double l_align_raw, double tau = kDefaultTau);

}  // namespace ccert
