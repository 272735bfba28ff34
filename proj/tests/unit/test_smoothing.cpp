#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "smpca/error.hpp"
#include "smpca/local_linear.hpp"
#include "smpca/simgen.hpp"
#include "smpca/smoothing.hpp"

using namespace smpca;

namespace {

constexpr double kPi = std::numbers::pi;

// J curves per subject, each sampled at n random sites; value = f(i, j, t).
template <typename F>
ObservationSet panel(std::size_t p, std::size_t J, std::size_t n, std::uint64_t seed, F&& f) {
  ObservationSet obs(p, J);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t z = 0; z < n; ++z) {
        const double t = u(rng);
        obs.add(i, j, t, f(i, j, t));
      }
  return obs;
}

SimConfig dense_case(std::uint64_t seed) {
  SimConfig c;
  c.J = 90;
  c.n_min = 10;
  c.n_max = 15;
  c.seed = seed;
  c.calibration_curves = 500;
  return c;
}

}  // namespace

TEST(LocalLinearTest, ReproducesConstants) {
  const auto obs = panel(1, 20, 4, 1, [](auto, auto, double) { return 5.0; });
  const auto grid = TimeGrid::uniform(51);
  const auto mu = estimate_mean(obs, 0, grid);
  EXPECT_LT((mu.array() - 5.0).abs().maxCoeff(), 1e-10);
}

TEST(LocalLinearTest, ReproducesLines) {
  const auto obs = panel(1, 60, 10, 2, [](auto, auto, double t) { return 2.0 * t + 1.0; });
  const auto grid = TimeGrid::uniform(51);
  const auto mu = estimate_mean(obs, 0, grid);
  for (std::size_t m = 0; m < grid.size(); ++m) EXPECT_NEAR(mu[static_cast<Eigen::Index>(m)], 2.0 * grid[m] + 1.0, 1e-8);
}

TEST(LocalLinearTest, SurfaceReproducesPlanes) {
  std::vector<double> x, y, z;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 400; ++n) {
    x.push_back(u(rng));
    y.push_back(u(rng));
    z.push_back(1.0 - 2.0 * x.back() + 0.5 * y.back());
  }
  const LocalLinear2D s(x, y, z);
  for (double a : {0.0, 0.3, 0.9})
    for (double b : {0.1, 0.5, 1.0}) EXPECT_NEAR(s.fit(a, b, 0.1), 1.0 - 2.0 * a + 0.5 * b, 1e-9);
}

TEST(LocalLinearTest, RotatedDiagonalFitIsExactForQuadraticRidge) {
  // z = 3 + t - 4 (x - y)^2 is linear along the diagonal and quadratic across it.
  std::vector<double> x, y, z;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 2000; ++n) {
    const double a = u(rng), b = u(rng);
    x.push_back(a);
    y.push_back(b);
    z.push_back(3.0 + 0.5 * (a + b) - 4.0 * (a - b) * (a - b));
  }
  const LocalLinear2D s(x, y, z);
  for (double t : {0.2, 0.5, 0.8}) EXPECT_NEAR(s.diagonal(t, 0.15), 3.0 + t, 1e-9);
}

TEST(LocalLinearTest, SparseDesignNeverReturnsNaN) {
  std::vector<double> t{0.0, 0.5, 1.0}, v{1.0, 2.0, 0.0};
  const LocalLinear1D s(t, v);
  const auto grid = TimeGrid::uniform(41);
  const auto fitted = s.evaluate(grid.points(), 0.05);
  EXPECT_TRUE(fitted.allFinite());
}

TEST(LocalLinearTest, GcvSelectsFromCandidates) {
  const auto obs = panel(1, 40, 8, 6, [](auto, auto, double t) { return std::sin(2 * kPi * t); });
  std::vector<double> t, v;
  for (std::size_t j = 0; j < obs.curves(); ++j) {
    const auto& c = obs.curve(0, j);
    t.insert(t.end(), c.times.begin(), c.times.end());
    v.insert(v.end(), c.values.begin(), c.values.end());
  }
  const LocalLinear1D s(t, v);
  const auto choice = s.select_bandwidth();
  EXPECT_EQ(choice.candidates.size(), 10u);
  EXPECT_TRUE(choice.from_gcv);
  EXPECT_NE(std::find(choice.candidates.begin(), choice.candidates.end(), choice.bandwidth), choice.candidates.end());
}

TEST(SmoothingTest, FewerThanThreeTimesThrows) {
  ObservationSet obs(1, 3);
  obs.add(0, 0, 0.2, 1.0);
  obs.add(0, 1, 0.7, 1.0);
  obs.add(0, 2, 0.2, 3.0);
  EXPECT_THROW(estimate_mean(obs, 0, TimeGrid::uniform(11)), InsufficientDataError);
}

TEST(SmoothingTest, ZeroMeanGeneratorGivesSmallMean) {
  // The generator has mu = 0, but 90 serially dependent curves leave a sample mean of
  // order 0.4 sd, so sup |mu_hat| itself is not small. The estimator is held to the
  // latent sample mean instead, in units of sqrt(E||eps||^2).
  double worst = 0.0, average = 0.0;
  int count = 0;
  for (std::uint64_t rep = 1; rep <= 20; ++rep) {
    const auto truth = gen_panel(dense_case(rep));
    const auto grid = TimeGrid::uniform(51);
    const auto latent = truth.latent_panel(grid, 0, truth.config.J);
    const auto means = estimate_means(truth.observations, grid);
    for (std::size_t i = 0; i < means.subjects(); ++i, ++count) {
      const Eigen::VectorXd sample_mean = latent.subject[i].colwise().mean().transpose();
      const double err = (means.subject[i] - sample_mean).cwiseAbs().maxCoeff() / std::sqrt(truth.energy[i]);
      worst = std::max(worst, err);
      average += err;
    }
  }
  EXPECT_LE(average / count, 0.2);
  EXPECT_LE(worst, 0.5);
}

TEST(SmoothingTest, LagZeroIsExactlySymmetric) {
  const auto truth = gen_panel(dense_case(3));
  const auto grid = TimeGrid::uniform(31);
  const auto means = estimate_means(truth.observations, grid);
  const auto c0 = estimate_autocov(truth.observations, 0, means.subject[0], 0, grid);
  EXPECT_EQ((c0 - c0.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SmoothingTest, NegativeLagIsTranspose) {
  const auto truth = gen_panel(dense_case(4));
  const auto grid = TimeGrid::uniform(21);
  const auto means = estimate_means(truth.observations, grid);
  const auto field = estimate_autocov_field(truth.observations, means, 2, grid);
  for (long h : {1L, 2L}) EXPECT_EQ((field.lag(1, -h) - field.lag(1, h).transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(estimate_autocov(truth.observations, 0, means.subject[0], 90, grid), ArgumentError);
}

TEST(SmoothingTest, IndependentCurvesHaveSmallLagOne) {
  // rho = 0 alone is not enough: with L >= 1 the moving-average structure couples
  // neighbouring curves. L = 0 gives independent curves. Sampling noise alone puts
  // ||C1|| / ||C0|| near sqrt(K / J), about 0.105 for K = 1 at J = 90.
  double ratio = 0.0;
  int count = 0;
  for (std::uint64_t rep = 5; rep <= 8; ++rep) {
    SimConfig c = dense_case(rep);
    c.rho = 0.0;
    c.K = 1;
    c.L = 0;
    c.calibration_curves = 300;
    const auto truth = gen_panel(c);
    const auto grid = TimeGrid::uniform(31);
    const auto means = estimate_means(truth.observations, grid);
    for (std::size_t i = 0; i < c.p; ++i, ++count) {
      const auto c0 = estimate_autocov(truth.observations, i, means.subject[i], 0, grid);
      const auto c1 = estimate_autocov(truth.observations, i, means.subject[i], 1, grid);
      ratio += c1.norm() / c0.norm();
    }
  }
  EXPECT_LE(ratio / count, 0.15);
}

TEST(SmoothingTest, LagOneTracksLatentCrossCovariance) {
  const auto truth = gen_panel(dense_case(5));
  const auto grid = TimeGrid::uniform(31);
  const auto latent = truth.latent_panel(grid, 0, truth.config.J);
  const auto means = estimate_means(truth.observations, grid);
  const auto J = static_cast<Eigen::Index>(truth.config.J);
  for (std::size_t i = 0; i < truth.config.p; ++i) {
    const Eigen::MatrixXd centered = latent.subject[i].rowwise() - latent.subject[i].colwise().mean();
    const Eigen::MatrixXd oracle =
        centered.bottomRows(J - 1).transpose() * centered.topRows(J - 1) / static_cast<double>(J);
    const auto c1 = estimate_autocov(truth.observations, i, means.subject[i], 1, grid);
    EXPECT_LE((c1 - oracle).norm(), 0.3 * oracle.norm()) << "subject " << i;
  }
}

TEST(SmoothingTest, ArOneLagIsHalfOfLagZero) {
  // eps_j(t) = a_j psi(t), a_j AR(1) with rho 0.5, small noise.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  const std::size_t J = 90;
  std::vector<double> a(J);
  double prev = 0.0;
  for (int b = 0; b < 200; ++b) prev = 0.5 * prev + n(rng);
  for (std::size_t j = 0; j < J; ++j) a[j] = prev = 0.5 * prev + n(rng);
  auto psi = [](double t) { return std::sqrt(2.0) * std::sin(kPi * t) + 1.0; };
  const auto obs = panel(1, J, 15, 9, [&](auto, std::size_t j, double t) { return a[j] * psi(t) + 0.05 * n(rng); });
  const auto grid = TimeGrid::uniform(21);
  const auto means = estimate_means(obs, grid);
  const auto c0 = estimate_autocov(obs, 0, means.subject[0], 0, grid);
  const auto c1 = estimate_autocov(obs, 0, means.subject[0], 1, grid);
  // Sample lag-1 autocorrelation of this particular path is the population target here.
  double num = 0.0, den = 0.0, mean = 0.0;
  for (double v : a) mean += v / static_cast<double>(J);
  for (std::size_t j = 0; j + 1 < J; ++j) num += (a[j + 1] - mean) * (a[j] - mean);
  for (std::size_t j = 0; j < J; ++j) den += (a[j] - mean) * (a[j] - mean);
  const double ratio = (c1.array() * c0.array()).sum() / c0.squaredNorm();
  EXPECT_NEAR(ratio, 0.5, 0.1);
  EXPECT_NEAR(ratio, num / den, 0.2 * std::abs(num / den));
}

TEST(NoiseVarianceTest, NoiselessDataGivesSmallVariance) {
  SimConfig c = dense_case(11);
  c.noise_ratio = 0.0;
  const auto truth = gen_panel(c);
  const auto grid = TimeGrid::uniform(51);
  const auto means = estimate_means(truth.observations, grid);
  const auto noise = estimate_noise_variances(truth.observations, means, grid);
  for (std::size_t i = 0; i < c.p; ++i) {
    const auto c0 = estimate_autocov(truth.observations, i, means.subject[i], 0, grid);
    EXPECT_LE(noise[i], 0.05 * c0.trace() / static_cast<double>(grid.size())) << "subject " << i;
    EXPECT_GT(noise[i], 0.0);
  }
}

TEST(NoiseVarianceTest, RecoversGeneratorNoiseOnAverage) {
  // Individual subjects scatter widely (noise is a tenth of the signal); the average
  // ratio over subjects and replicates is held to the +-50% band.
  double sum = 0.0;
  int count = 0;
  for (std::uint64_t rep = 1; rep <= 4; ++rep) {
    const auto truth = gen_panel(dense_case(100 + rep));
    const auto grid = TimeGrid::uniform(51);
    const auto means = estimate_means(truth.observations, grid);
    const auto noise = estimate_noise_variances(truth.observations, means, grid);
    for (std::size_t i = 0; i < noise.size(); ++i, ++count) sum += noise[i] / truth.noise_variance[i];
  }
  EXPECT_NEAR(sum / count, 1.0, 0.5);
}

TEST(NoiseVarianceTest, PureNoiseMatchesSampleVariance) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.5);
  const auto obs = panel(2, 60, 10, 13, [&](auto, auto, double) { return n(rng); });
  const auto grid = TimeGrid::uniform(51);
  const auto means = estimate_means(obs, grid);
  const auto noise = estimate_noise_variances(obs, means, grid);
  const double var = pooled_sample_variance(obs);
  for (double v : noise) EXPECT_NEAR(v, var, 0.2 * var);
}

TEST(NoiseVarianceTest, FloorIsRespected) {
  const auto obs = panel(1, 30, 6, 14, [](auto, auto, double t) { return std::sin(2 * kPi * t); });
  const auto grid = TimeGrid::uniform(31);
  const auto means = estimate_means(obs, grid);
  SmoothingOptions opts;
  opts.noise_floor_ratio = 0.0;
  const auto noise = estimate_noise_variances(obs, means, grid, opts);
  EXPECT_GE(noise[0], 1e-8 * pooled_sample_variance(obs));
}

TEST(NoiseVarianceTest, MoreNoiseNeverLowersTheEstimateOnAverage) {
  double low = 0.0, high = 0.0;
  for (std::uint64_t rep = 1; rep <= 20; ++rep) {
    SimConfig c;
    c.J = 30;
    c.seed = rep;
    c.calibration_curves = 300;
    c.noise_ratio = 0.05;
    const auto a = gen_panel(c);
    c.noise_ratio = 0.2;
    const auto b = gen_panel(c);
    const auto grid = TimeGrid::uniform(31);
    const auto na = estimate_noise_variances(a.observations, estimate_means(a.observations, grid), grid);
    const auto nb = estimate_noise_variances(b.observations, estimate_means(b.observations, grid), grid);
    for (std::size_t i = 0; i < na.size(); ++i) {
      low += na[i];
      high += nb[i];
    }
  }
  EXPECT_GE(high, low);
}
