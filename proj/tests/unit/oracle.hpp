#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library: plain loops, long double accumulation.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ccert/prob.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline long double kl(const std::vector<double>& p, const std::vector<double>& q) {
  long double s = 0;
  for (std::size_t c = 0; c < p.size(); ++c)
    if (p[c] > 0) s += static_cast<long double>(p[c]) * (std::log(static_cast<long double>(p[c])) - std::log(static_cast<long double>(q[c])));
  return s;
}

inline std::vector<double> column_mean(const Rows& rows) {
  std::vector<long double> acc(rows[0].size(), 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) acc[c] += r[c];
  std::vector<double> out(acc.size());
  for (std::size_t c = 0; c < acc.size(); ++c) out[c] = static_cast<double>(acc[c] / rows.size());
  return out;
}

inline long double mean_kl_to(const Rows& rows, const std::vector<double>& q) {
  long double s = 0;
  for (const auto& r : rows) s += kl(r, q);
  return s / rows.size();
}

inline long double mutual_information(const Rows& rows) { return mean_kl_to(rows, column_mean(rows)); }

// Softmax of Gaussian logits; `spread` controls how peaked rows are.
inline Rows random_rows(std::mt19937_64& g, std::size_t n, std::size_t k, double spread) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Rows rows(n, std::vector<double>(k));
  for (auto& r : rows) {
    double m = -1e300;
    std::vector<double> l(k);
    for (auto& v : l) {
      v = spread * nd(g);
      m = std::max(m, v);
    }
    double z = 0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(l[c] - m);
    for (std::size_t c = 0; c < k; ++c) r[c] = std::exp(l[c] - m) / z;
  }
  return rows;
}

inline std::vector<double> random_simplex(std::mt19937_64& g, std::size_t k, double floor = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(k);
  double s = 0;
  for (auto& v : a) {
    v = floor + u(g);
    s += v;
  }
  for (auto& v : a) v /= s;
  return a;
}

inline std::vector<double> log_of(const std::vector<double>& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i]);
  return out;
}

inline ccert::AssignmentMatrix to_matrix(const Rows& rows) { return ccert::AssignmentMatrix::from_rows(rows); }

}  // namespace oracle
