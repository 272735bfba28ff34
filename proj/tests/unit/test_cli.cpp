#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>
#include <gtest/gtest.h>

#include "commands.hpp"

namespace fs = std::filesystem;
using smpca::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("smpca_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    const auto r = invoke({"simulate", "-o", path("obs.csv"), "--truth", path("truth.bin"), "--p", "3", "--J", "30",
                           "--nrange", "10-15", "--holdout", "5", "--seed", "11"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static std::vector<std::string> fit_args(const std::string& model) {
    return {"fit", "-d", path("obs.csv"), "-m", path(model), "--time-points", "21", "--freq-points", "32"};
  }

  static fs::path dir_;
};

fs::path CliTest::dir_;

}  // namespace

TEST_F(CliTest, SimulateWritesLongFormatCsv) {
  std::ifstream in(path("obs.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "subject,curve,time,value");
  const double rows = static_cast<double>(line_count(path("obs.csv")) - 1);
  EXPECT_GE(rows, 3 * 30 * 10);
  EXPECT_LE(rows, 3 * 30 * 15);
  EXPECT_TRUE(fs::exists(path("truth.bin")));
}

TEST_F(CliTest, SimulateDefaultsAndCaseFlag) {
  auto r = invoke({"simulate", "-o", path("default.csv"), "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  // Defaults: p = 5, J = 60, N uniform on 5..10 (mean 7.5).
  const double rows = static_cast<double>(line_count(path("default.csv")) - 1);
  EXPECT_NEAR(rows / (5 * 60 * 7.5), 1.0, 0.1);
  r = invoke({"simulate", "-o", path("case2.csv"), "--case", "2", "--J", "10", "--seed", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("case 2"), std::string::npos);
}

TEST_F(CliTest, SimulateValidation) {
  EXPECT_EQ(invoke({"simulate", "-o", path("x.csv"), "--nrange", "9-4"}).code, 2);
  const auto r = invoke({"simulate", "-o", path("x.csv"), "--nrange", "a-b"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nrange"), std::string::npos);
  EXPECT_EQ(invoke({"simulate", "-o", path("x.csv"), "--case", "4"}).code, 2);
  EXPECT_EQ(invoke({"simulate"}).code, 2);
}

TEST_F(CliTest, FitImputeEvalForecast) {
  auto r = invoke(fit_args("model.bin"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("h_max"), std::string::npos);
  EXPECT_NE(r.out.find("K"), std::string::npos);

  r = invoke({"impute", "-m", path("model.bin"), "-o", path("imputed.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(path("imputed.csv")), 3u * 30u * 21u + 1u);

  r = invoke({"eval", "--truth", path("truth.bin"), "--curves", path("imputed.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(r.out.rfind("nmse ", 0), 0u) << r.out;
  const double nmse = std::stod(r.out.substr(5));
  EXPECT_GT(nmse, 0.0);
  EXPECT_LT(nmse, 0.3);

  r = invoke({"forecast", "-m", path("model.bin"), "--horizon", "5", "-o", path("forecast.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(path("forecast.csv")), 5u * 3u * 21u + 1u);
  r = invoke({"eval", "--truth", path("truth.bin"), "--curves", path("forecast.csv")});
  EXPECT_EQ(r.code, 0) << r.err;

  EXPECT_EQ(invoke({"forecast", "-m", path("model.bin"), "--horizon", "0"}).code, 2);
}

TEST_F(CliTest, RefitIsByteIdentical) {
  ASSERT_EQ(invoke(fit_args("a.bin")).code, 0);
  ASSERT_EQ(invoke(fit_args("b.bin")).code, 0);
  EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
}

TEST_F(CliTest, DataAndModelErrors) {
  { std::ofstream(path("empty.csv")) << ""; }
  EXPECT_EQ(invoke({"fit", "-d", path("empty.csv"), "-m", path("e.bin")}).code, 3);
  { std::ofstream(path("header.csv")) << "subject,curve,time,value\n"; }
  EXPECT_EQ(invoke({"fit", "-d", path("header.csv"), "-m", path("e.bin")}).code, 3);
  EXPECT_EQ(invoke({"impute", "-m", path("missing.bin")}).code, 3);
  EXPECT_EQ(invoke({"forecast", "-m", path("missing.bin"), "--horizon", "2"}).code, 3);
  EXPECT_EQ(invoke({"impute", "-m", path("truth.bin")}).code, 3);
}

TEST_F(CliTest, ConfigErrors) {
  auto args = fit_args("m.bin");
  args.insert(args.end(), {"--method", "pada"});
  EXPECT_EQ(invoke(args).code, 2);
  { std::ofstream(path("bad.json")) << R"({"grids": {"points": 3}})"; }
  const auto r = invoke({"fit", "-c", path("bad.json"), "-d", path("obs.csv"), "-m", path("m.bin")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("points"), std::string::npos);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({}).code, 2);
}

TEST_F(CliTest, SchemaCommand) {
  auto r = invoke({"schema"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("2020-12"), std::string::npos);
  r = invoke({"schema", "--defaults"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"time_points\": 51"), std::string::npos);
}

TEST_F(CliTest, BenchmarkIsDeterministic) {
  const std::vector<std::string> base{"benchmark", "--reps", "1", "--seed", "7", "--J", "30", "--nranges", "10-15",
                                      "--methods", "spectral_mpca", "--time-points", "21", "--freq-points", "32"};
  auto a = base, b = base;
  a.insert(a.end(), {"-o", path("bench_a.csv")});
  b.insert(b.end(), {"-o", path("bench_b.csv")});
  ASSERT_EQ(invoke(a).code, 0);
  ASSERT_EQ(invoke(b).code, 0);
  EXPECT_EQ(slurp(path("bench_a.csv")), slurp(path("bench_b.csv")));
  EXPECT_EQ(slurp(path("bench_a_summary.csv")), slurp(path("bench_b_summary.csv")));
  EXPECT_EQ(slurp(path("bench_a.csv")).rfind("case,J,nrange,method,rep,metric,value\n", 0), 0u);

  auto bad = base;
  bad.insert(bad.end(), {"-o", path("bench_c.csv"), "--methods", "lrfpca"});
  EXPECT_EQ(invoke(bad).code, 2);
}

TEST_F(CliTest, ThreadsFromEnvironment) {
  ::setenv("SPECTRAL_MPCA_THREADS", "many", 1);
  EXPECT_EQ(invoke(fit_args("t.bin")).code, 2);
  ::setenv("SPECTRAL_MPCA_THREADS", "2", 1);
  EXPECT_EQ(invoke(fit_args("t.bin")).code, 0);
  ::unsetenv("SPECTRAL_MPCA_THREADS");
}
