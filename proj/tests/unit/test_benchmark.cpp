#include <sstream>

#include <gtest/gtest.h>

#include "smpca/benchmark_harness.hpp"
#include "smpca/error.hpp"

using namespace smpca;

namespace {

BenchmarkSpec tiny_spec() {
  BenchmarkSpec spec;
  spec.Js = {30};
  spec.nranges = {{10, 15}};
  spec.reps = 2;
  spec.seed = 7;
  spec.base.p = 3;
  spec.base.calibration_curves = 200;
  spec.fit.time_points = 21;
  spec.fit.freq_points = 32;
  return spec;
}

std::string results_csv(const BenchmarkResult& r) {
  std::ostringstream s;
  write_results_csv(s, r.rows);
  return s.str();
}

}  // namespace

TEST(BenchmarkSpecTest, Validation) {
  EXPECT_NO_THROW(tiny_spec().validate());
  auto s = tiny_spec();
  s.reps = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = tiny_spec();
  s.metrics = {"mae"};
  EXPECT_THROW(s.validate(), ConfigError);
  s = tiny_spec();
  s.nranges = {{5, 4}};
  EXPECT_THROW(s.validate(), ConfigError);
  s = tiny_spec();
  s.methods.clear();
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(BenchmarkTest, ReplicateSeedsDiffer) {
  const auto a = replicate_seed(1, 1, 60, {5, 10}, 0);
  EXPECT_EQ(a, replicate_seed(1, 1, 60, {5, 10}, 0));
  EXPECT_NE(a, replicate_seed(1, 1, 60, {5, 10}, 1));
  EXPECT_NE(a, replicate_seed(1, 2, 60, {5, 10}, 0));
  EXPECT_NE(a, replicate_seed(1, 1, 30, {5, 10}, 0));
  EXPECT_NE(a, replicate_seed(1, 1, 60, {4, 5}, 0));
  EXPECT_NE(a, replicate_seed(2, 1, 60, {5, 10}, 0));
}

TEST(BenchmarkTest, DeterministicAcrossRunsAndThreads) {
  auto spec = tiny_spec();
  spec.reps = 1;
  const auto a = run_benchmark(spec);
  const auto b = run_benchmark(spec);
  ASSERT_TRUE(a.failures.empty());
  ASSERT_EQ(a.rows.size(), 2u);  // one NMSE per method
  EXPECT_EQ(results_csv(a), results_csv(b));
  spec.reps = 3;
  spec.threads = 1;
  const auto serial = run_benchmark(spec);
  spec.threads = 3;
  EXPECT_EQ(results_csv(run_benchmark(spec)), results_csv(serial));
}

TEST(BenchmarkTest, ForecastMetricRows) {
  auto spec = tiny_spec();
  spec.reps = 1;
  spec.metrics = {"nmse", "nmspe"};
  spec.horizon = 2;
  spec.refit = RefitMode::ScoresOnly;
  const auto r = run_benchmark(spec);
  ASSERT_TRUE(r.failures.empty());
  ASSERT_EQ(r.rows.size(), 4u);
  for (const auto& row : r.rows) {
    EXPECT_GT(row.value, 0.0);
    EXPECT_LT(row.value, 2.0);
  }
}

TEST(BenchmarkTest, FailuresAreRecorded) {
  auto spec = tiny_spec();
  spec.fit.K = 100;  // more components than grid points
  const auto r = run_benchmark(spec);
  EXPECT_TRUE(r.rows.empty());
  EXPECT_EQ(r.failures.size(), 2u);
}

TEST(SummaryTest, Aggregates) {
  std::vector<BenchmarkRow> rows;
  for (std::size_t rep = 0; rep < 3; ++rep)
    rows.push_back({1, 60, {5, 10}, "spectral_mpca", rep, "nmse", 0.1 * static_cast<double>(rep + 1)});
  rows.push_back({1, 60, {5, 10}, "individual_spectral", 0, "nmse", 0.5});
  const auto summary = summarize(rows);
  ASSERT_EQ(summary.size(), 2u);
  const auto& s = summary[0].method == "spectral_mpca" ? summary[0] : summary[1];
  EXPECT_EQ(s.count, 3u);
  EXPECT_NEAR(s.mean, 0.2, 1e-15);
  EXPECT_NEAR(s.sd, 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(s.min, 0.1);
  EXPECT_DOUBLE_EQ(s.max, 0.30000000000000004);
  std::ostringstream out;
  write_summary_csv(out, summary);
  EXPECT_EQ(out.str().rfind("case,J,nrange,method,metric,n,mean,sd,min,max\n", 0), 0u);
  EXPECT_EQ(format_nrange({5, 10}), "5-10");
  EXPECT_EQ(format_nrange({4, 5}), "4-5");
}

TEST(SummaryTest, ResultsCsvRows) {
  std::ostringstream out;
  write_results_csv(out, {{2, 30, {4, 5}, "spectral_mpca", 3, "nmse", 0.125}});
  EXPECT_EQ(out.str(), "case,J,nrange,method,rep,metric,value\n2,30,4-5,spectral_mpca,3,nmse,0.125\n");
}
