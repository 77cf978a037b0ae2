#include <benchmark/benchmark.h>

#include "phasetip/tipping.hpp"
#include "phasetip/trial_sim.hpp"

namespace {

using namespace phasetip;

const std::vector<SubjectRecord>& calibrated() {
  static const auto d = simulate_trial(SimConfig{}, 1);
  return d;
}

Effect effect_of(const benchmark::State& state) {
  return state.range(0) == 1 ? Effect::Effect1 : Effect::Effect2;
}

void BM_DrawImputations(benchmark::State& state) {
  const auto e = effect_of(state);
  std::uint64_t rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(draw_imputations(calibrated(), e, 1, ++rep));
}
BENCHMARK(BM_DrawImputations)->Arg(1)->Arg(2);

void BM_EvaluateAt(benchmark::State& state) {
  const auto e = effect_of(state);
  const auto draws = draw_imputations(calibrated(), e, 1, 0);
  const double gamma = e == Effect::Effect1 ? 1.8 : 0.8;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_at(calibrated(), {e, gamma}, draws));
}
BENCHMARK(BM_EvaluateAt)->Arg(1)->Arg(2);

void BM_SearchReplicate(benchmark::State& state) {
  SearchConfig cfg;
  cfg.effect = effect_of(state);
  cfg.threshold = state.range(1) ? Threshold::B_neutralize : Threshold::A_significance;
  cfg.seed = 1;
  const auto draws = draw_imputations(calibrated(), cfg.effect, cfg.seed, 0);
  for (auto _ : state) benchmark::DoNotOptimize(search_replicate(calibrated(), cfg, draws));
}
BENCHMARK(BM_SearchReplicate)->ArgsProduct({{1, 2}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_FindTipping(benchmark::State& state) {
  SearchConfig cfg;
  cfg.seed = 1;
  cfg.replicates = static_cast<int>(state.range(0));
  cfg.threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(find_tipping(calibrated(), cfg));
}
BENCHMARK(BM_FindTipping)
    ->ArgsProduct({{5, 20}, {1, 4}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

}  // namespace
