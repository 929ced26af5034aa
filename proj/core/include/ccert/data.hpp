#pragma once

// Deterministic synthetic mixtures and CSV feature ingestion.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccert/autodiff.hpp"

namespace ccert {

struct MixtureSpec {
  std::size_t n = 2000;
  std::size_t d = 16;
  std::size_t c = 8;
  double separation = 10.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Tensor x;                       // N x D
  std::vector<int> true_cluster;  // generator ground truth, -1 when unknown
  std::optional<MixtureSpec> meta;

  std::size_t n() const { return x.rows(); }
  std::size_t d() const { return x.cols(); }
};

// Cluster means sit on a scaled, centred simplex frame (axis vertices when
// c <= d, rescaled Gaussian draws otherwise) so that every pairwise distance
// is at least separation * noise_sigma (separation alone when sigma is 0).
// Sample i belongs to cluster i mod c, giving sizes that differ by at most one.
Dataset gen_mixture(const MixtureSpec& spec);

// Headerless CSV of reals, one row per sample.
Dataset load_features(const std::string& path);
void write_features(const std::string& path, const Tensor& x);

void write_meta(const std::string& path, const MixtureSpec& spec);
MixtureSpec read_meta(const std::string& path);

}  // namespace ccert
