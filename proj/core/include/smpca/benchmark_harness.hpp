#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smpca/pipeline.hpp"
#include "smpca/simgen.hpp"
#include "smpca/tasks.hpp"

namespace smpca {

/// Monte Carlo scenario grid: every combination of case, J and N-range, `reps` replicates each.
struct BenchmarkSpec {
  std::vector<int> cases{1};
  std::vector<std::size_t> Js{60};
  std::vector<std::pair<std::size_t, std::size_t>> nranges{{5, 10}};
  std::vector<Method> methods{Method::SpectralMpca, Method::IndividualSpectral};
  std::vector<std::string> metrics{"nmse"};
  std::size_t reps = 20;
  std::size_t horizon = 5;
  RefitMode refit = RefitMode::Full;
  /// Generator settings other than case, J and N-range.
  SimConfig base;
  FitOptions fit;
  std::optional<std::size_t> var_P_max;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

struct BenchmarkRow {
  int case_id = 1;
  std::size_t J = 0;
  std::pair<std::size_t, std::size_t> nrange;
  std::string method;
  std::size_t rep = 0;
  std::string metric;
  double value = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<std::string> failures;
};

struct SummaryRow {
  int case_id = 1;
  std::size_t J = 0;
  std::pair<std::size_t, std::size_t> nrange;
  std::string method;
  std::string metric;
  std::size_t count = 0;
  double mean = 0.0, sd = 0.0, min = 0.0, max = 0.0;
};

/// Seed of one replicate, derived from the base seed and the scenario coordinates.
std::uint64_t replicate_seed(std::uint64_t base, int case_id, std::size_t J, std::pair<std::size_t, std::size_t> nrange,
                             std::size_t rep);

/// Metrics of every method on one simulated panel. Methods share the smoothed moments.
std::vector<BenchmarkRow> evaluate_replicate(const BenchmarkSpec& spec, int case_id, std::size_t J,
                                             std::pair<std::size_t, std::size_t> nrange, std::size_t rep);

/// Replicate failures are recorded in `failures`, never thrown.
BenchmarkResult run_benchmark(const BenchmarkSpec& spec);

std::vector<SummaryRow> summarize(const std::vector<BenchmarkRow>& rows);

std::string format_nrange(std::pair<std::size_t, std::size_t> nrange);
/// Columns case,J,nrange,method,rep,metric,value.
void write_results_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);
/// Columns case,J,nrange,method,metric,n,mean,sd,min,max.
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace smpca
