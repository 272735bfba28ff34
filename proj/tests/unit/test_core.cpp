#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "smpca/error.hpp"
#include "smpca/grid.hpp"
#include "smpca/observations.hpp"

using namespace smpca;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXcd sample(const TimeGrid& g, auto&& f) {
  Eigen::VectorXcd v(g.size());
  for (std::size_t m = 0; m < g.size(); ++m) v[static_cast<Eigen::Index>(m)] = f(g[m]);
  return v;
}

}  // namespace

TEST(TimeGridTest, UniformWeightsSumToSpan) {
  const auto g = TimeGrid::uniform(31);
  EXPECT_EQ(g.size(), 31u);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[30], 1.0);
  EXPECT_NEAR(g.weights().sum(), 1.0, 1e-14);
  EXPECT_TRUE((g.weights().array() > 0).all());
  for (std::size_t m = 1; m < g.size(); ++m) EXPECT_GT(g[m], g[m - 1]);
}

TEST(TimeGridTest, RejectsBadPoints) {
  Eigen::VectorXd p(3);
  p << 0.0, 0.5, 0.5;
  EXPECT_THROW(TimeGrid{p}, ArgumentError);
  p << 0.0, 0.5, 1.5;
  EXPECT_THROW(TimeGrid{p}, ArgumentError);
}

TEST(InnerProductTest, UnitConstant) {
  const auto g = TimeGrid::uniform(31);
  const auto one = sample(g, [](double) { return cdouble(1.0); });
  EXPECT_NEAR(std::abs(trapezoid_inner_product(one, one, g) - 1.0), 0.0, 1e-12);
}

TEST(InnerProductTest, SineCosineOrthogonal) {
  const auto g = TimeGrid::uniform(1001);
  const auto s = sample(g, [](double t) { return cdouble(std::sin(2 * kPi * t)); });
  const auto c = sample(g, [](double t) { return cdouble(std::cos(2 * kPi * t)); });
  EXPECT_LT(std::abs(trapezoid_inner_product(s, c, g)), 1e-3);
}

TEST(InnerProductTest, SquareOfIdentity) {
  const auto g = TimeGrid::uniform(101);
  const auto t = sample(g, [](double x) { return cdouble(x); });
  EXPECT_NEAR(trapezoid_inner_product(t, t, g).real(), 1.0 / 3.0, 1e-4);
}

TEST(InnerProductTest, ExactForLinearFunctions) {
  const auto g = TimeGrid::uniform(17);
  const auto f = sample(g, [](double x) { return cdouble(2.0 * x - 0.3); });
  const auto one = sample(g, [](double) { return cdouble(1.0); });
  EXPECT_NEAR(trapezoid_inner_product(one, f, g).real(), 0.7, 1e-12);
}

TEST(InnerProductTest, ConjugateSymmetryAndLinearity) {
  const auto g = TimeGrid::uniform(23);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 10; ++rep) {
    const auto f = sample(g, [&](double) { return cdouble(n(rng), n(rng)); });
    const auto h = sample(g, [&](double) { return cdouble(n(rng), n(rng)); });
    const cdouble a(n(rng), n(rng));
    EXPECT_LT(std::abs(trapezoid_inner_product(f, h, g) - std::conj(trapezoid_inner_product(h, f, g))), 1e-12);
    const Eigen::VectorXcd af = a * f;
    EXPECT_LT(std::abs(trapezoid_inner_product(af, h, g) - std::conj(a) * trapezoid_inner_product(f, h, g)), 1e-12);
  }
}

TEST(InnerProductTest, GridMismatchThrows) {
  const auto g = TimeGrid::uniform(5);
  Eigen::VectorXcd f = Eigen::VectorXcd::Ones(4);
  Eigen::VectorXcd h = Eigen::VectorXcd::Ones(5);
  EXPECT_THROW(trapezoid_inner_product(f, h, g), DimensionError);
}

TEST(GridBuilderTest, ThirtyOnePointTimeGrid) {
  const auto grids = build_uniform_grids(31, 128, 60);
  for (std::size_t m = 0; m < 31; ++m) EXPECT_NEAR(grids.time[m], static_cast<double>(m) / 30.0, 1e-15);
}

TEST(GridBuilderTest, MinimalGrid) {
  const auto grids = build_uniform_grids(2, 2, 1);
  EXPECT_EQ(grids.time.size(), 2u);
  const auto& f = grids.frequency;
  EXPECT_GE(f.size(), 2u);
  EXPECT_NEAR(f.points().minCoeff(), -kPi, 1e-15);
  EXPECT_NEAR(f.points().maxCoeff(), kPi, 1e-15);
  EXPECT_NEAR(f.weights().sum(), 2 * kPi, 1e-12);
}

TEST(GridBuilderTest, ContainsWhittleSet) {
  const auto grids = build_uniform_grids(101, 64, 30);
  const auto& f = grids.frequency;
  EXPECT_GE(f.size(), 64u);
  ASSERT_EQ(f.whittle_length(), 30u);
  for (std::size_t j = 1; j <= 30; ++j) {
    double w = 2 * kPi * static_cast<double>(j) / 30.0;
    if (w > kPi) w -= 2 * kPi;
    if (j == 30) w = 0.0;
    EXPECT_NEAR(f[f.whittle()[j - 1]], w, 1e-13) << "j=" << j;
  }
}

TEST(GridBuilderTest, RejectsTinyCounts) {
  EXPECT_THROW(build_uniform_grids(1, 64, 10), ArgumentError);
  EXPECT_THROW(build_uniform_grids(10, 1, 10), ArgumentError);
  EXPECT_THROW(build_uniform_grids(10, 64, 0), ArgumentError);
}

TEST(FrequencyGridTest, NegationClosureIsExact) {
  for (std::size_t J : {1u, 7u, 30u, 61u}) {
    const FrequencyGrid f(64, J);
    for (std::size_t a = 0; a < f.size(); ++a) {
      const std::size_t b = f.mirror(a);
      const bool at_pi = std::abs(std::abs(f[a]) - kPi) < 1e-15;
      if (!at_pi) EXPECT_EQ(f[b], -f[a]);
      EXPECT_EQ(f.weights()[static_cast<Eigen::Index>(b)], f.weights()[static_cast<Eigen::Index>(a)]);
    }
  }
}

TEST(FrequencyGridTest, QuadratureIntegratesTrigExactly) {
  const FrequencyGrid f(64, 17);
  EXPECT_NEAR(f.weights().sum(), 2 * kPi, 1e-12);
  for (int h = 1; h < 20; ++h) {
    double s = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a) s += f.weights()[static_cast<Eigen::Index>(a)] * std::cos(h * f[a]);
    EXPECT_NEAR(s, 0.0, 1e-12) << "h=" << h;
  }
}

TEST(FrequencyGridTest, NonnegativeNodesAscending) {
  const FrequencyGrid f(64, 13);
  const auto& nn = f.nonnegative();
  ASSERT_FALSE(nn.empty());
  EXPECT_EQ(nn.front(), f.zero_index());
  EXPECT_EQ(f[nn.front()], 0.0);
  for (std::size_t n = 1; n < nn.size(); ++n) EXPECT_GT(f[nn[n]], f[nn[n - 1]]);
}

TEST(ObservationsTest, ValidPanelReport) {
  ObservationSet obs(2, 3);
  std::size_t total = 0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t z = 0; z <= i + j; ++z, ++total) obs.add(i, j, 0.1 * static_cast<double>(z), 1.0);
  const auto r = validate_observations(obs);
  EXPECT_TRUE(r.issues.empty());
  EXPECT_FALSE(r.has_errors());
  EXPECT_DOUBLE_EQ(r.mean_count, static_cast<double>(total) / 6.0);
  EXPECT_DOUBLE_EQ(obs.mean_count(), r.mean_count);
}

TEST(ObservationsTest, OutOfRangeTime) {
  ObservationSet obs(1, 2);
  obs.add(0, 0, 0.5, 1.0);
  obs.add(0, 1, 1.5, 1.0);
  const auto r = validate_observations(obs);
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].kind, ObservationIssue::Kind::OutOfRange);
  EXPECT_EQ(r.issues[0].curve, 1u);
}

TEST(ObservationsTest, EmptyCurveWarning) {
  ObservationSet obs(1, 2);
  obs.add(0, 0, 0.5, 1.0);
  const auto r = validate_observations(obs);
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].kind, ObservationIssue::Kind::EmptyCurve);
}

TEST(ObservationsTest, NoiseVariancesMustBePositive) {
  ObservationSet obs(2, 1);
  EXPECT_THROW(obs.set_noise_variances({1.0, 0.0}), ArgumentError);
  EXPECT_THROW(obs.set_noise_variances({1.0}), DimensionError);
  obs.set_noise_variances({1.0, 2.0});
  EXPECT_EQ(obs.noise_variances()->at(1), 2.0);
}

TEST(ObservationsTest, CsvRoundTripIsExact) {
  ObservationSet obs(3, 4);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (int z = 0; z < 5; ++z) obs.add(i, j, u(rng), n(rng) * 1e3);
  std::stringstream ss;
  write_observations_csv(ss, obs);
  EXPECT_EQ(ss.str().substr(0, 25), "subject,curve,time,value\n");
  const ObservationSet back = read_observations_csv(ss);
  EXPECT_TRUE(back == obs);
}

TEST(ObservationsTest, CsvErrors) {
  std::stringstream empty;
  EXPECT_THROW(read_observations_csv(empty), InsufficientDataError);
  std::stringstream header_only("subject,curve,time,value\n");
  EXPECT_THROW(read_observations_csv(header_only), InsufficientDataError);
  std::stringstream bad("subject,curve,time,value\n1,1,abc,2\n");
  EXPECT_THROW(read_observations_csv(bad), InsufficientDataError);
}

TEST(ObservationsTest, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(ObservationsTest, PrefixAndSelect) {
  ObservationSet obs(3, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) obs.add(i, j, 0.5, static_cast<double>(10 * i + j));
  const auto pre = obs.prefix(2);
  EXPECT_EQ(pre.curves(), 2u);
  EXPECT_EQ(pre.curve(2, 1).values[0], 21.0);
  const auto sel = obs.select_subjects({2, 0});
  EXPECT_EQ(sel.subjects(), 2u);
  EXPECT_EQ(sel.curve(0, 3).values[0], 23.0);
}
