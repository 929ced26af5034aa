#pragma once

// Central finite-difference checks for the tape, shared by the CLI's
// gradcheck command and the benchmarks.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ccert/autodiff.hpp"

namespace ccert {

// |a - n| / max(|a|, |n|, floor)
double rel_err(double analytic, double numeric, double floor = 1e-4);

// Builds a scalar graph from leaves bound to `inputs` and compares backward()
// to central differences with step h. Returns the max relative error.
using GraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;
double fd_max_rel_err(const GraphFn& f, const std::vector<Tensor>& inputs, double h = 1e-5);

struct GradcheckResult {
  std::string name;
  double max_rel_err = 0.0;
  int cases = 0;
};

// Every differentiable op plus the full four-term loss, each on `configs`
// random shapes/values derived from seed.
std::vector<GradcheckResult> gradcheck_suite(std::uint64_t seed, int configs);

}  // namespace ccert
