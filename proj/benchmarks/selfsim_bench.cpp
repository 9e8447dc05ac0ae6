#include <benchmark/benchmark.h>

#include <cmath>

#include "selfsim/exponents.hpp"
#include "selfsim/pde.hpp"
#include "selfsim/phase.hpp"
#include "selfsim/shooter.hpp"
#include "selfsim/tail.hpp"

using namespace selfsim;

namespace {

const DerivedConstants& ref_consts() {
  static const DerivedConstants c = derive_constants({1, 1.2, 0.5});
  return c;
}

const ProfileSolution& ref_profile() {
  static const ProfileSolution sol = find_profile(ref_consts(), find_bracket(ref_consts()), 1e-10, 1e5);
  return sol;
}

}  // namespace

static void BM_DeriveConstants(benchmark::State& state) {
  for (auto _ : state) {
    const DerivedConstants c = derive_constants({2, 1.5, 0.6});
    benchmark::DoNotOptimize(spectral_data(c));
  }
}
BENCHMARK(BM_DeriveConstants);

static void BM_IntegrateProfile(benchmark::State& state) {
  const double a = ref_profile().a_star;
  const double r_max = std::pow(10.0, static_cast<double>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_profile(ref_consts(), a, r_max, 1e-12));
  }
}
BENCHMARK(BM_IntegrateProfile)->DenseRange(2, 4)->Unit(benchmark::kMicrosecond);

static void BM_FindProfile(benchmark::State& state) {
  const Bracket b = find_bracket(ref_consts());
  for (auto _ : state) {
    benchmark::DoNotOptimize(find_profile(ref_consts(), b, 1e-10, 1e5));
  }
}
BENCHMARK(BM_FindProfile)->Unit(benchmark::kMillisecond);

static void BM_FitTail(benchmark::State& state) {
  const auto ws = w_transform(ref_profile().trajectory, ref_consts());
  const TailWindow window = default_window(ws.back().r);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_tail(ws, ref_consts(), window));
  }
}
BENCHMARK(BM_FitTail)->Unit(benchmark::kMicrosecond);

static void BM_ExtractRates(benchmark::State& state) {
  const PhasePath path = map_to_phase(ref_profile().trajectory, ref_consts());
  const RateWindow window = default_rate_window(path);
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_rates(path, ref_consts(), window));
  }
}
BENCHMARK(BM_ExtractRates)->Unit(benchmark::kMicrosecond);

static void BM_PdeStep(benchmark::State& state) {
  const RadialGrid g = RadialGrid::make(55.0, static_cast<int>(state.range(0)), 1);
  const SelfSimilarField f0 = build_initial(ref_profile().trajectory, ref_consts(), 1.0, g);
  PdeOptions o;
  o.scheme = state.range(1) ? PdeScheme::kExplicit : PdeScheme::kLinearlyImplicit;
  const double dt = o.scheme == PdeScheme::kExplicit ? stable_dt(g, ref_consts().params, o) : 2e-4;
  SelfSimilarField f = f0;
  for (auto _ : state) {
    step(f, g, ref_consts().params, o, dt);
    if (f.t > 0.5) f = f0;
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PdeStep)->ArgsProduct({{200, 800, 3200}, {0, 1}})->ArgNames({"M", "explicit"});

BENCHMARK_MAIN();
