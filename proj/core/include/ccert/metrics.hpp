#pragma once

// Certificate reports from the raw witness, plus secondary diagnostics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ccert/autodiff.hpp"
#include "ccert/prob.hpp"
#include "ccert/vae.hpp"

namespace ccert {

enum class TargetKind { SearchedTeacher, FixedT0 };

const char* target_kind_name(TargetKind k);

struct CertificateReport {
  double i_t = 0.0;
  double l_align_raw = 0.0;
  double bare_margin = 0.0;
  double g_tau = 0.0;
  double tau = kDefaultTau;
  double student_mi = 0.0;
  std::size_t n_eval = 0;
  TargetKind target_kind = TargetKind::SearchedTeacher;
  std::uint64_t teacher_fingerprint = 0;
  std::string eval_set = "train";
};

// witness_log_rows: N x K log-probabilities of the raw head.
CertificateReport certify(const Tensor& witness_log_rows, const AssignmentMatrix& teacher_rows,
                          double tau = kDefaultTau, TargetKind kind = TargetKind::SearchedTeacher,
                          std::uint64_t teacher_fingerprint = 0);

// Evaluates the witness at z = mu(x). Only the encoder mean and the head are
// read; the decoder never enters.
CertificateReport certify_model(const ModelParams& params, const Tensor& x, const AssignmentMatrix& teacher_rows,
                                double tau = kDefaultTau, TargetKind kind = TargetKind::SearchedTeacher,
                                std::uint64_t teacher_fingerprint = 0);

std::string report_json(const CertificateReport& r);

// (tau', bare_margin - tau') for each tau'.
std::vector<std::pair<double, double>> tau_sensitivity(const CertificateReport& report, const std::vector<double>& taus);

// 10 log10(peak^2 / MSE); +inf when MSE is 0.
double psnr(const Tensor& x, const Tensor& xhat, double peak = 1.0);

// Latent dims whose mean activation varies across samples by more than threshold.
std::size_t active_units(const Tensor& mu_rows, double threshold = 0.01);

struct ProbeConfig {
  int iterations = 500;
  double lr = 0.1;
};

// Train-set accuracy of full-batch softmax regression on standardized features.
double linear_probe(const Tensor& features, const std::vector<int>& labels, std::size_t k, const ProbeConfig& cfg = {});

// Top-1 teacher component per row.
std::vector<int> hard_labels(const AssignmentMatrix& rows);

struct DiagnosticsReport {
  double psnr = 0.0;
  std::size_t active_units = 0;
  std::optional<double> probe_accuracy;
};

}  // namespace ccert
