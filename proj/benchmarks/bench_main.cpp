#include <benchmark/benchmark.h>

#include <random>

#include "ccert/data.hpp"
#include "ccert/gradcheck.hpp"
#include "ccert/prob.hpp"
#include "ccert/teacher.hpp"
#include "ccert/trainer.hpp"
#include "ccert/vae.hpp"

using namespace ccert;

namespace {

AssignmentMatrix random_matrix(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> flat(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0;
    for (std::size_t c = 0; c < k; ++c) z += flat[i * k + c] = std::exp(rng.normal());
    for (std::size_t c = 0; c < k; ++c) flat[i * k + c] /= z;
  }
  return AssignmentMatrix(n, k, std::move(flat));
}

void BM_TeacherMi(benchmark::State& st) {
  const auto m = random_matrix(static_cast<std::size_t>(st.range(0)), 8, 1);
  for (auto _ : st) benchmark::DoNotOptimize(teacher_mi(m));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_TeacherMi)->Arg(2000)->Arg(50000);

void BM_EmFit(benchmark::State& st) {
  const auto x = gen_mixture({2000, 4, 8, 6.0, 1.0, 1}).x;
  for (auto _ : st) benchmark::DoNotOptimize(em_fit(x, static_cast<std::size_t>(st.range(0)), {50, 1e-9, 1e-6, 0}));
}
BENCHMARK(BM_EmFit)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

// One forward + backward pass of the four-term objective at the default dims.
void BM_LossStep(benchmark::State& st) {
  const std::size_t n = static_cast<std::size_t>(st.range(0));
  const auto p = ModelParams::init({16, 4, 8, 32}, true, 2);
  const auto x = gen_mixture({n, 16, 8, 10.0, 1.0, 3}).x;
  const auto t = random_matrix(n, 8, 4);
  const Tensor tt(Shape{n, 8}, t.data());
  Tensor noise(Shape{n, 4});
  Rng rng(5);
  for (auto& v : noise.data()) v = rng.normal();
  const LossInputs in{&x, &tt, nullptr, &noise};
  for (auto _ : st) {
    auto g = losses(p, in, {});
    benchmark::DoNotOptimize(g.param_grads(g.total));
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_LossStep)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_CertifyModel(benchmark::State& st) {
  const auto p = ModelParams::init({16, 4, 8, 32}, true, 2);
  const auto x = gen_mixture({2000, 16, 8, 10.0, 1.0, 3}).x;
  const auto t = random_matrix(2000, 8, 4);
  for (auto _ : st) benchmark::DoNotOptimize(certify_model(p, x, t));
}
BENCHMARK(BM_CertifyModel)->Unit(benchmark::kMillisecond);

void BM_FreeLogitFlow(benchmark::State& st) {
  const auto t = random_matrix(64, 8, 6);
  for (auto _ : st) benchmark::DoNotOptimize(free_logit_flow_check(t, static_cast<int>(st.range(0))));
}
BENCHMARK(BM_FreeLogitFlow)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_GradcheckSuite(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(gradcheck_suite(1, 10));
}
BENCHMARK(BM_GradcheckSuite)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
