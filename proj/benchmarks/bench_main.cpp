#include <map>
#include <random>

#include <benchmark/benchmark.h>

#include "smpca/filters.hpp"
#include "smpca/pipeline.hpp"
#include "smpca/scores.hpp"
#include "smpca/simgen.hpp"
#include "smpca/smoothing.hpp"
#include "smpca/spectral.hpp"

using namespace smpca;

namespace {

TruthPanel panel(std::size_t J, std::size_t n_min, std::size_t n_max) {
  SimConfig c;
  c.J = J;
  c.n_min = n_min;
  c.n_max = n_max;
  c.seed = 17;
  c.calibration_curves = 500;
  return gen_panel(c);
}

const Moments& moments_for(std::size_t J) {
  static std::map<std::size_t, Moments> cache;
  auto it = cache.find(J);
  if (it == cache.end()) it = cache.emplace(J, estimate_moments(panel(J, 5, 10).observations, FitOptions{})).first;
  return it->second;
}

void BM_MeanSmoothing(benchmark::State& state) {
  const auto truth = panel(static_cast<std::size_t>(state.range(0)), 5, 10);
  const auto grid = TimeGrid::uniform(51);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_means(truth.observations, grid, SmoothingOptions{}));
}
BENCHMARK(BM_MeanSmoothing)->Arg(30)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_EstimateMoments(benchmark::State& state) {
  const auto truth = panel(static_cast<std::size_t>(state.range(0)), 5, 10);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_moments(truth.observations, FitOptions{}));
}
BENCHMARK(BM_EstimateMoments)->Arg(30)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_Eigendecomposition(benchmark::State& state) {
  const auto& m = moments_for(60);
  const auto marginal = marginal_spectral(m.subject_fields);
  const auto threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(eigendecompose_per_frequency(marginal, m.grids.time, m.grids.frequency, 5, threads));
}
BENCHMARK(BM_Eigendecomposition)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_PhaseAndFilters(benchmark::State& state) {
  const auto& m = moments_for(60);
  const auto eig = eigendecompose_per_frequency(marginal_spectral(m.subject_fields), m.grids.time, m.grids.frequency, 3);
  for (auto _ : state) benchmark::DoNotOptimize(build_filter_bank(eig, 3, m.grids.time, m.grids.frequency));
}
BENCHMARK(BM_PhaseAndFilters)->Unit(benchmark::kMillisecond);

// MAP solve; doubling J shows how the score system scales.
void BM_MapScores(benchmark::State& state) {
  const auto J = static_cast<std::size_t>(state.range(0));
  const auto& m = moments_for(J);
  const auto truth = panel(J, 5, 10);
  const auto model = fit_from_moments(truth.observations, m, FitOptions{});
  const auto& group = model.groups.front();
  const ScoreLayout layout(model.p, J, group.bank.L_list());
  const auto design = build_design(truth.observations, group.bank, layout, model.means, model.noise);
  const WhittlePrecision Q(group.eta, layout);
  for (auto _ : state) benchmark::DoNotOptimize(map_scores(design, Q));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(J));
}
BENCHMARK(BM_MapScores)->Arg(30)->Arg(60)->Arg(120)->Arg(240)->Complexity()->Unit(benchmark::kMillisecond);

void BM_FitModel(benchmark::State& state) {
  const auto truth = panel(static_cast<std::size_t>(state.range(0)), 5, 10);
  for (auto _ : state) benchmark::DoNotOptimize(fit_model(truth.observations, FitOptions{}));
}
BENCHMARK(BM_FitModel)->Arg(60)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
