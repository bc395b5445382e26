#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fipe/driver.hpp"
#include "fipe/oracle.hpp"
#include "fipe/solver.hpp"
#include "fipe/trainer.hpp"
#include "fipe/verifier.hpp"

namespace {

using namespace fipe;

// Dense random covering LP: min sum x subject to A x >= 1, A in [0, 1].
solver::MilpProblem covering_lp(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  solver::MilpProblem p;
  std::vector<solver::Term> obj;
  for (int j = 0; j < n; ++j) {
    p.add_variable("x" + std::to_string(j), 0.0, 1e30);
    obj.push_back({j, 1.0});
  }
  for (int i = 0; i < 2 * n; ++i) {
    std::vector<solver::Term> row;
    for (int j = 0; j < n; ++j) row.push_back({j, u(rng)});
    p.add_constraint("r" + std::to_string(i), row, solver::Relation::GreaterEqual, 1.0);
  }
  p.set_objective(solver::Sense::Minimize, obj);
  return p;
}

void BM_SolveLp(benchmark::State& state) {
  const auto p = covering_lp(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(solver::solve_lp(p));
}
BENCHMARK(BM_SolveLp)->Arg(10)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);

Ensemble adaboost_on(SyntheticKind kind, int trees, int depth) {
  const Dataset d = make_synthetic(kind, 200, 0);
  return train_adaboost(d, trees, depth, 0);
}

void BM_SeparateAdaBoost(benchmark::State& state) {
  const Ensemble e = adaboost_on(SyntheticKind::Separable, static_cast<int>(state.range(0)), 1);
  // Keep every other tree: a typical mid-run iterate.
  std::vector<double> w = e.weights();
  for (std::size_t m = 0; m < w.size(); m += 2) w[m] = 0.0;
  SeparationOptions o;
  o.parallel = false;
  for (auto _ : state) benchmark::DoNotOptimize(separate(e, w, o));
}
BENCHMARK(BM_SeparateAdaBoost)->Arg(10)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Certify(benchmark::State& state) {
  const Ensemble e = adaboost_on(SyntheticKind::Blobs, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(certify(e, e.weights(), 1e-6));
  state.counters["cells"] = static_cast<double>(cell_count(e.schema()));
}
BENCHMARK(BM_Certify)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_FipeL1(benchmark::State& state) {
  const Dataset d = make_synthetic(SyntheticKind::Separable, 200, 0);
  const Ensemble e = train_adaboost(d, static_cast<int>(state.range(0)), 1, 0);
  FipeOptions o;
  o.norm = Norm::L1;
  for (auto _ : state) benchmark::DoNotOptimize(fipe::fipe(e, d.rows, o));
}
BENCHMARK(BM_FipeL1)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
