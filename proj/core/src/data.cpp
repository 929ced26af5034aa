#include "ccert/data.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "ccert/error.hpp"
#include "ccert/rng.hpp"
#include "ccert/serialize.hpp"
#include "json_util.hpp"

namespace ccert {

namespace {

double min_pairwise_distance(const std::vector<std::vector<double>>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < pts[a].size(); ++j) s += (pts[a][j] - pts[b][j]) * (pts[a][j] - pts[b][j]);
      best = std::min(best, std::sqrt(s));
    }
  return best;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset gen_mixture(const MixtureSpec& spec) {
  if (spec.c < 2) throw InvalidInput("gen_mixture: need c >= 2 clusters, got " + std::to_string(spec.c));
  if (spec.n < spec.c) throw InvalidInput("gen_mixture: need n >= c");
  if (spec.d < 1) throw InvalidInput("gen_mixture: need d >= 1");
  if (!(spec.separation > 0.0) || !(spec.noise_sigma >= 0.0)) {
    throw InvalidInput("gen_mixture: separation must be > 0 and noise_sigma >= 0");
  }
  Rng rng(spec.seed);
  const double min_dist = spec.noise_sigma > 0.0 ? spec.separation * spec.noise_sigma : spec.separation;

  std::vector<std::vector<double>> means(spec.c, std::vector<double>(spec.d, 0.0));
  if (spec.c <= spec.d) {
    const double a = min_dist / std::sqrt(2.0);
    for (std::size_t k = 0; k < spec.c; ++k) means[k][k] = a;
  } else {
    for (auto& m : means)
      for (double& v : m) v = rng.normal();
    const double md = min_pairwise_distance(means);
    if (!(md > 0.0)) throw InvalidInput("gen_mixture: degenerate cluster frame");
    for (auto& m : means)
      for (double& v : m) v *= min_dist / md;
  }
  std::vector<double> centroid(spec.d, 0.0);
  for (const auto& m : means)
    for (std::size_t j = 0; j < spec.d; ++j) centroid[j] += m[j] / static_cast<double>(spec.c);
  for (auto& m : means)
    for (std::size_t j = 0; j < spec.d; ++j) m[j] -= centroid[j];

  Dataset ds;
  ds.x = Tensor(Shape{spec.n, spec.d});
  ds.true_cluster.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t k = i % spec.c;
    ds.true_cluster[i] = static_cast<int>(k);
    for (std::size_t j = 0; j < spec.d; ++j) ds.x.at(i, j) = means[k][j] + spec.noise_sigma * rng.normal();
  }
  ds.meta = spec;
  return ds;
}

Dataset load_features(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<double> flat;
  std::size_t width = 0, rows = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::vector<double> vals;
    std::stringstream fields(t);
    std::string field;
    while (std::getline(fields, field, ',')) {
      const std::string f = trim(field);
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size()) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-numeric field '" + f + "'");
      }
      vals.push_back(v);
    }
    if (rows == 0) {
      width = vals.size();
    } else if (vals.size() != width) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": ragged row (" + std::to_string(vals.size()) +
                       " fields, expected " + std::to_string(width) + ")");
    }
    flat.insert(flat.end(), vals.begin(), vals.end());
    ++rows;
  }
  if (rows == 0) throw InvalidInput(path + ": no samples");
  Dataset ds;
  ds.x = Tensor(Shape{rows, width}, std::move(flat));
  ds.true_cluster.assign(rows, -1);
  return ds;
}

void write_features(const std::string& path, const Tensor& x) {
  std::string out;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (j) out += ',';
      out += format_double(x.at(i, j));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void write_meta(const std::string& path, const MixtureSpec& spec) {
  detail::json j;
  j["n"] = spec.n;
  j["d"] = spec.d;
  j["c"] = spec.c;
  j["separation"] = spec.separation;
  j["noise_sigma"] = spec.noise_sigma;
  j["seed"] = spec.seed;
  write_text_file(path, detail::dump17(j, 2) + "\n");
}

MixtureSpec read_meta(const std::string& path) {
  const auto j = detail::parse_json_file(path);
  MixtureSpec s;
  try {
    s.n = detail::require(j, "n", path).get<std::size_t>();
    s.d = detail::require(j, "d", path).get<std::size_t>();
    s.c = detail::require(j, "c", path).get<std::size_t>();
    s.separation = detail::require(j, "separation", path).get<double>();
    s.noise_sigma = detail::require(j, "noise_sigma", path).get<double>();
    s.seed = detail::require(j, "seed", path).get<std::uint64_t>();
  } catch (const detail::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return s;
}

}  // namespace ccert
