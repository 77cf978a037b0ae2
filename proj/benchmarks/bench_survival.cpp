#include <benchmark/benchmark.h>

#include "phasetip/survival.hpp"
#include "phasetip/trial_sim.hpp"

namespace {

using namespace phasetip;

std::vector<SubjectRecord> trial(int scale) {
  SimConfig c;
  c.n_experimental *= scale;
  c.n_control *= scale;
  return simulate_trial(c, 1);
}

void BM_KaplanMeier(benchmark::State& state) {
  const auto d = trial(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(km_estimate(d, Arm::Control));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(d.size()));
}
BENCHMARK(BM_KaplanMeier)->Arg(1)->Arg(4)->Arg(16);

void BM_LogRank(benchmark::State& state) {
  const auto d = trial(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(logrank_test(d));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(d.size()));
}
BENCHMARK(BM_LogRank)->Arg(1)->Arg(4)->Arg(16);

void BM_CoxTreatment(benchmark::State& state) {
  const auto d = trial(static_cast<int>(state.range(0)));
  const auto rows = to_unsplit_rows(d);
  const auto ties = state.range(1) ? Ties::Efron : Ties::Breslow;
  for (auto _ : state) benchmark::DoNotOptimize(cox_fit(rows, {CoxModel::Treatment, ties}));
}
BENCHMARK(BM_CoxTreatment)->ArgsProduct({{1, 4, 16}, {0, 1}});

void BM_PhaseHr(benchmark::State& state) {
  const auto d = trial(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(phase_hr(d));
}
BENCHMARK(BM_PhaseHr)->Arg(1)->Arg(4);

void BM_SimulateTrial(benchmark::State& state) {
  SimConfig c;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_trial(c, ++seed));
}
BENCHMARK(BM_SimulateTrial);

}  // namespace
