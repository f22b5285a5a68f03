#include <benchmark/benchmark.h>

#include "titrate/ipw.hpp"
#include "titrate/nlme.hpp"
#include "titrate/pk.hpp"
#include "titrate/seqstd.hpp"
#include "titrate/trial.hpp"

using namespace titrate;

static void BM_SimulateTrial(benchmark::State& state) {
  const auto s = make_scenario(Variant::kMain, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_trial(s));
  state.SetItemsProcessed(state.iterations() * state.range(0) * kNumArms);
}
BENCHMARK(BM_SimulateTrial)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

static void BM_ConcMM(benchmark::State& state) {
  const auto doses = planned_schedule(arm_by_id(5));
  for (auto _ : state) benchmark::DoNotOptimize(conc_mm(MMParams{}, doses, 1344.0, 1.0));
}
BENCHMARK(BM_ConcMM);

static void BM_LaplaceValueAndGradient(benchmark::State& state) {
  const auto ds = simulate_trial(make_scenario(Variant::kMain, static_cast<std::size_t>(state.range(0)), 1));
  LaplaceObjective obj(ds, LaplaceConfig{});
  const LogParams lp = to_log(PopulationParams{});
  LogParams g{};
  for (auto _ : state) benchmark::DoNotOptimize(obj.value_and_gradient(lp, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(obj.size()));
}
BENCHMARK(BM_LaplaceValueAndGradient)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_GFormulaSample(benchmark::State& state) {
  const auto ds = simulate_trial(make_scenario(Variant::kMain, 1000, 1));
  const auto models = fit_arm_models(ds, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gformula_sample(models, arm_by_id(5), static_cast<std::size_t>(state.range(0)), 1));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GFormulaSample)->Arg(5000)->Unit(benchmark::kMillisecond);

static void BM_FitIeModel(benchmark::State& state) {
  const auto ds = simulate_trial(make_scenario(Variant::kMain, 5000, 1));
  for (auto _ : state) benchmark::DoNotOptimize(fit_ie_model(ds));
}
BENCHMARK(BM_FitIeModel)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
