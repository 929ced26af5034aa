#pragma once

// Diagonal-covariance GMM teachers: fitting, feasibility diagnostics,
// candidate search and the fixed target cache T0(x).

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ccert/autodiff.hpp"
#include "ccert/prob.hpp"

namespace ccert {

struct GmmTeacher {
  std::size_t k = 0;
  std::size_t d = 0;
  std::vector<double> weights;    // k
  std::vector<double> means;      // k x d, row-major
  std::vector<double> variances;  // k x d, row-major
  std::uint64_t fit_seed = 0;
  double loglik = 0.0;  // mean per-sample log-likelihood at convergence

  double mean(std::size_t c, std::size_t j) const { return means[c * d + j]; }
  double variance(std::size_t c, std::size_t j) const { return variances[c * d + j]; }

  // FNV-1a over the bit patterns of every parameter.
  std::uint64_t fingerprint() const;
  void validate(double var_floor = 0.0) const;
};

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-6;  // nats per sample
  double var_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct EmTrace {
  std::vector<double> loglik;  // mean log-likelihood at each E-step
  int iterations = 0;
  int reinits = 0;
  bool converged = false;
};

// Indices of the k seeds in selection order (k-means++ D^2 weighting).
std::vector<std::size_t> kmeanspp_indices(const Tensor& features, std::size_t k, std::uint64_t seed);
Tensor kmeanspp_init(const Tensor& features, std::size_t k, std::uint64_t seed);

GmmTeacher em_fit(const Tensor& features, std::size_t k, const EmConfig& config, EmTrace* trace = nullptr);

struct Assignment {
  SimplexVector probs;
  std::vector<double> log_probs;
};

Assignment assign(const GmmTeacher& teacher, std::span<const double> feature);
AssignmentMatrix assign_rows(const GmmTeacher& teacher, const Tensor& features);

// Feasibility defaults are artifact choices; the criteria names are fixed.
struct DiagnosticThresholds {
  double margin_threshold = 0.5;
  double min_high_margin_fraction = 0.5;
  double min_mass_times_k = 0.5;       // min_component_mass >= this / K
  double max_soft_usage_over_lnk = 0.5;  // soft_usage_kl <= this * ln K
  double min_i_t = 0.1;
  double max_hard_balance_kl = std::numeric_limits<double>::infinity();
};

struct TeacherDiagnostics {
  double i_t = 0.0;
  double mean_top1_margin = 0.0;
  double high_margin_fraction = 0.0;
  double hard_balance_kl = 0.0;
  double soft_usage_kl = 0.0;
  double min_component_mass = 0.0;
  bool feasible = false;
  std::vector<std::string> failed_criteria;
  std::string evaluated_on = "fitting_set";
};

TeacherDiagnostics diagnostics(const AssignmentMatrix& rows, const DiagnosticThresholds& thresholds = {});

struct CandidateSummary {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;
  std::string error;
  TeacherDiagnostics diagnostics;
};

struct SearchResult {
  GmmTeacher teacher;
  TeacherDiagnostics diagnostics;
  AssignmentMatrix rows;
  std::vector<CandidateSummary> candidates;  // sorted by (k, seed)
};

// Fits every (k, seed) pair and returns the feasible candidate with the
// highest I_T, or the best infeasible one flagged feasible=false. Ties go to
// the lower k, then the lower seed. Throws SearchFailed if every fit is
// degenerate.
SearchResult search(const Tensor& features, std::span<const std::size_t> ks, std::span<const std::uint64_t> seeds,
                    const DiagnosticThresholds& thresholds = {}, const EmConfig& em = {});

struct TargetCache {
  AssignmentMatrix rows;
  std::vector<std::int64_t> sample_ids;  // strictly increasing
  std::uint64_t teacher_fingerprint = 0;

  // Digest over fingerprint, ids and row bits; stored alongside the cache so
  // an edited file is detected on load.
  std::uint64_t content_digest() const;
};

TargetCache cache_targets(const GmmTeacher& teacher, const Tensor& features, std::vector<std::int64_t> sample_ids);

// Throws CacheMismatch when the cache was not produced by `teacher`.
void verify_cache(const TargetCache& cache, std::uint64_t expected_fingerprint);

std::string fingerprint_hex(std::uint64_t fp);

void save_teacher(const std::string& path, const GmmTeacher& teacher);
GmmTeacher load_teacher(const std::string& path);
void save_cache(const std::string& path, const TargetCache& cache);
// Throws CacheMismatch if the stored digest does not match the content.
TargetCache load_cache(const std::string& path);
std::string diagnostics_json(const TeacherDiagnostics& diag, const DiagnosticThresholds& thresholds);

}  // namespace ccert
