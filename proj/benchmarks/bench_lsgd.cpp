#include "lsgd/data.hpp"
#include "lsgd/fedsim.hpp"
#include "lsgd/problem.hpp"
#include "lsgd/residue.hpp"
#include "lsgd/spectral.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace lsgd;

namespace {

// 1000 samples, 10 classes; dimension 10 * (p + 1).
std::shared_ptr<const Dataset> multiclass(std::size_t p) {
  return std::make_shared<const Dataset>(make_synthetic_multiclass(1000, p, 10, 11));
}

void BM_LocalUpdateSoftmax(benchmark::State& state) {
  const SoftmaxProblem problem(multiclass(196));
  const auto shards = partition_iid(problem.all_samples().size(), 100, 3);
  const ParamVector x = ParamVector::Zero(static_cast<Eigen::Index>(problem.dim()));
  const auto k = static_cast<std::size_t>(state.range(0));
  std::size_t round = 0;
  for (auto _ : state) {
    const RngStream s{.seed = 1, .client = 0, .round = round++};
    benchmark::DoNotOptimize(local_client_update(problem, shards[0], x, k, 0.01, 10, s));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(k));
}
BENCHMARK(BM_LocalUpdateSoftmax)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_SoftmaxHessian(benchmark::State& state) {
  const SoftmaxProblem problem(multiclass(static_cast<std::size_t>(state.range(0))));
  const ParamVector x = ParamVector::Constant(static_cast<Eigen::Index>(problem.dim()), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(problem.hessian(x));
  state.counters["dim"] = static_cast<double>(problem.dim());
}
BENCHMARK(BM_SoftmaxHessian)->Arg(24)->Arg(99)->Unit(benchmark::kMillisecond);

void BM_EigSym(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto q = make_synthetic_quadratic(d, log_spaced(1e-3, 1.0, d), 5);
  for (auto _ : state) benchmark::DoNotOptimize(eig_sym(q->a()));
}
BENCHMARK(BM_EigSym)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_AnalyzeRound(benchmark::State& state) {
  const auto q = make_synthetic_quadratic(200, log_spaced(1e-3, 1.0, 200), 5);
  FedRunConfig cfg;
  cfg.local_steps = 50;
  cfg.learning_rate = 0.1;
  cfg.full_batch = true;
  const Vector x0 = Vector::Ones(200);
  const RoundTrace tr = run_training(*q, cfg, x0).traces.front();
  for (auto _ : state) benchmark::DoNotOptimize(analyze_round(q->a(), tr, 0.1, 50));
}
BENCHMARK(BM_AnalyzeRound)->Unit(benchmark::kMillisecond);

void BM_ResidueEstimate(benchmark::State& state) {
  const SoftmaxProblem problem(multiclass(48));
  const auto shards = partition_iid(problem.all_samples().size(), 10, 3);
  const ParamVector x = ParamVector::Zero(static_cast<Eigen::Index>(problem.dim()));
  ResidueRequest req;
  req.iteration = static_cast<std::size_t>(state.range(0));
  req.batch_size = 10;
  req.trials = 20;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_residue_expectation(problem, shards[0], x, req));
}
BENCHMARK(BM_ResidueEstimate)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
