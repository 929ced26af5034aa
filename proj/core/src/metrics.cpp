#include "ccert/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccert/error.hpp"
#include "ccert/teacher.hpp"
#include "json_util.hpp"

namespace ccert {

const char* target_kind_name(TargetKind k) {
  return k == TargetKind::FixedT0 ? "fixed_t0" : "searched_teacher";
}

CertificateReport certify(const Tensor& wlog, const AssignmentMatrix& teacher, double tau, TargetKind kind,
                          std::uint64_t fp) {
  if (wlog.rank() != 2 || wlog.rows() != teacher.n() || wlog.cols() != teacher.k()) {
    throw ShapeError("certify: witness " + shape_str(wlog.shape()) + " vs teacher " +
                     shape_str(Shape{teacher.n(), teacher.k()}));
  }
  const std::size_t n = teacher.n(), k = teacher.k();
  CertificateReport r;
  r.n_eval = n;
  r.target_kind = kind;
  r.teacher_fingerprint = fp;
  r.i_t = teacher_mi(teacher);

  CompensatedSum align;
  for (std::size_t i = 0; i < n; ++i) align.add(kl_row(teacher.row(i), wlog.row(i)));
  r.l_align_raw = align.value() / static_cast<double>(n);

  std::vector<double> probs(n * k);
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(wlog[i]);
  std::vector<CompensatedSum> col(k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) col[c].add(probs[i * k + c]);
  std::vector<double> log_bar(k);
  for (std::size_t c = 0; c < k; ++c) log_bar[c] = std::log(col[c].value() / static_cast<double>(n));
  CompensatedSum smi;
  for (std::size_t i = 0; i < n; ++i) smi.add(kl_row({probs.data() + i * k, k}, log_bar));
  r.student_mi = std::max(0.0, smi.value() / static_cast<double>(n));

  const auto m = margin(r.i_t, r.l_align_raw, tau);
  r.tau = m.tau;
  r.bare_margin = m.bare_margin;
  r.g_tau = m.g_tau;
  return r;
}

CertificateReport certify_model(const ModelParams& params, const Tensor& x, const AssignmentMatrix& teacher,
                                double tau, TargetKind kind, std::uint64_t fp) {
  const auto enc = encode(params, x);
  const auto w = raw_witness(params, enc.mu);
  return certify(w.log_probs, teacher, tau, kind, fp);
}

std::string report_json(const CertificateReport& r) {
  detail::json j;
  j["i_t"] = r.i_t;
  j["l_align_raw"] = r.l_align_raw;
  j["bare_margin"] = r.bare_margin;
  j["g_tau"] = r.g_tau;
  j["tau"] = r.tau;
  j["student_mi"] = r.student_mi;
  j["n_eval"] = r.n_eval;
  j["target_kind"] = target_kind_name(r.target_kind);
  j["teacher_fingerprint"] = fingerprint_hex(r.teacher_fingerprint);
  j["eval_set"] = r.eval_set;
  return detail::dump17(j);
}

std::vector<std::pair<double, double>> tau_sensitivity(const CertificateReport& r, const std::vector<double>& taus) {
  std::vector<std::pair<double, double>> out;
  out.reserve(taus.size());
  for (double t : taus) out.emplace_back(t, margin(r.i_t, r.l_align_raw, t).g_tau);
  return out;
}

double psnr(const Tensor& x, const Tensor& xhat, double peak) {
  if (x.shape() != xhat.shape()) throw ShapeError("psnr: " + shape_str(x.shape()) + " vs " + shape_str(xhat.shape()));
  if (!(peak > 0.0)) throw InvalidInput("psnr: peak must be > 0");
  if (x.size() == 0) throw InvalidInput("psnr: empty input");
  CompensatedSum s;
  for (std::size_t i = 0; i < x.size(); ++i) s.add((x[i] - xhat[i]) * (x[i] - xhat[i]));
  const double mse = s.value() / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

std::size_t active_units(const Tensor& mu, double threshold) {
  if (mu.rank() != 2 || mu.rows() < 2) throw InvalidInput("active_units: need an N x L matrix with N >= 2");
  const std::size_t n = mu.rows();
  std::size_t count = 0;
  for (std::size_t j = 0; j < mu.cols(); ++j) {
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) s.add(mu.at(i, j));
    const double m = s.value() / static_cast<double>(n);
    CompensatedSum q;
    for (std::size_t i = 0; i < n; ++i) q.add((mu.at(i, j) - m) * (mu.at(i, j) - m));
    if (q.value() / static_cast<double>(n - 1) > threshold) ++count;
  }
  return count;
}

std::vector<int> hard_labels(const AssignmentMatrix& rows) {
  std::vector<int> out(rows.n());
  for (std::size_t i = 0; i < rows.n(); ++i) {
    const auto r = rows.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double linear_probe(const Tensor& f, const std::vector<int>& labels, std::size_t k, const ProbeConfig& cfg) {
  if (f.rank() != 2 || f.rows() != labels.size() || f.rows() == 0) throw ShapeError("linear_probe: features/labels mismatch");
  const std::size_t n = f.rows(), l = f.cols();
  std::vector<std::size_t> freq(k, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw InvalidInput("linear_probe: label out of range");
    ++freq[static_cast<std::size_t>(y)];
  }
  const auto majority = *std::max_element(freq.begin(), freq.end());
  if (majority == n) return 1.0;

  // Standardize so a fixed lr behaves the same at any feature scale.
  Tensor x(Shape{n, l});
  for (std::size_t j = 0; j < l; ++j) {
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) s.add(f.at(i, j));
    const double m = s.value() / static_cast<double>(n);
    CompensatedSum q;
    for (std::size_t i = 0; i < n; ++i) q.add((f.at(i, j) - m) * (f.at(i, j) - m));
    const double sd = std::sqrt(q.value() / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) x.at(i, j) = sd > 1e-12 ? (f.at(i, j) - m) / sd : 0.0;
  }

  std::vector<double> w(l * k, 0.0), b(k, 0.0), gw(l * k), gb(k), logits(k);
  auto predict = [&](std::size_t i) {
    for (std::size_t c = 0; c < k; ++c) {
      double s = b[c];
      for (std::size_t j = 0; j < l; ++j) s += x.at(i, j) * w[j * k + c];
      logits[c] = s;
    }
  };
  for (int it = 0; it < cfg.iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      predict(i);
      const auto p = softmax(logits);
      for (std::size_t c = 0; c < k; ++c) {
        const double g = p[c] - (static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < l; ++j) gw[j * k + c] += g * x.at(i, j);
      }
    }
    const double step = cfg.lr / static_cast<double>(n);
    for (std::size_t q = 0; q < w.size(); ++q) w[q] -= step * gw[q];
    for (std::size_t c = 0; c < k; ++c) b[c] -= step * gb[c];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    predict(i);
    const auto top = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (top == static_cast<std::size_t>(labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace ccert
