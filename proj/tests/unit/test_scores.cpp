#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "smpca/error.hpp"
#include "smpca/scores.hpp"
#include "test_support.hpp"

using namespace smpca;

using smpca::testing::dft_quadratic;
using smpca::testing::random_bank;
using smpca::testing::random_eta;
using smpca::testing::random_panel;

namespace {

struct Instance {
  ObservationSet obs;
  FilterBank bank;
  ScoreLayout layout;
  MeanFunctions means;
  std::vector<double> noise;
  DesignSystem design;
  WhittlePrecision Q;
};

Instance small_instance(std::size_t p, std::size_t J, std::vector<std::size_t> L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Instance s;
  const auto grid = TimeGrid::uniform(11);
  s.obs = random_panel(p, J, 1, 4, rng);
  s.bank = random_bank(grid, L, rng);
  s.layout = ScoreLayout(p, J, L);
  for (std::size_t i = 0; i < p; ++i) s.means.subject.push_back(smpca::testing::random_real(11, 1, rng).col(0));
  std::uniform_real_distribution<double> u(0.3, 2.0);
  for (std::size_t i = 0; i < p; ++i) s.noise.push_back(u(rng));
  s.design = build_design(s.obs, s.bank, s.layout, s.means, s.noise);
  s.Q = WhittlePrecision(random_eta(p, L.size(), J, rng), s.layout);
  return s;
}

}  // namespace

TEST(LayoutTest, ColumnOrderIsComponentThenCurveThenSubject) {
  const ScoreLayout layout(2, 3, {1, 0});
  EXPECT_EQ(layout.T(0), 5u);
  EXPECT_EQ(layout.T(1), 3u);
  EXPECT_EQ(layout.size(), 16u);
  EXPECT_EQ(layout.column(0, -1, 0), 0u);
  EXPECT_EQ(layout.column(1, -1, 0), 1u);
  EXPECT_EQ(layout.column(0, 0, 0), 2u);
  EXPECT_EQ(layout.column(1, 3, 0), 9u);
  EXPECT_EQ(layout.column(0, 0, 1), 10u);
  EXPECT_EQ(layout.column(1, 2, 1), 15u);
  EXPECT_THROW(layout.column(0, -2, 0), ArgumentError);
}

TEST(LayoutTest, SeriesRoundTrip) {
  const ScoreLayout layout(3, 4, {2, 1});
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(layout.size()), 0.0, 1.0);
  const ScoreArray scores(layout, v);
  Eigen::VectorXd back(v.size());
  for (std::size_t k = 0; k < layout.K(); ++k) {
    const auto S = scores.series(k);
    ASSERT_EQ(S.cols(), static_cast<Eigen::Index>(layout.T(k)));
    for (std::size_t r = 0; r < layout.T(k); ++r)
      for (std::size_t i = 0; i < 3; ++i)
        back[static_cast<Eigen::Index>(layout.column_at(i, r, k))] = S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r));
  }
  EXPECT_EQ(back, v);
  EXPECT_EQ(scores.at(2, -2, 0), v[2]);
}

TEST(DesignTest, WorkedExampleSparsityPattern) {
  // (p, J, K, L_1) = (2, 3, 1, 1) with two observations per curve.
  const auto grid = TimeGrid::uniform(11);
  Eigen::MatrixXd phi(11, 3);
  for (Eigen::Index m = 0; m < 11; ++m) {
    const double t = grid[static_cast<std::size_t>(m)];
    phi(m, 0) = 1.0 + t;
    phi(m, 1) = 2.0 + t * t;
    phi(m, 2) = 3.0 - t;
  }
  const FilterBank bank(grid, {phi});
  ObservationSet obs(2, 3);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      obs.add(i, j, 0.1 * static_cast<double>(i + j + 1), 1.0);
      obs.add(i, j, 0.05 + 0.2 * static_cast<double>(j), 2.0);
    }
  const ScoreLayout layout(2, 3, {1});
  const auto design = build_design(obs, bank, layout);
  ASSERT_EQ(design.A.rows(), 12);
  ASSERT_EQ(design.A.cols(), 10);
  const Eigen::MatrixXd A = design.A;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t z = 0; z < 2; ++z) {
        const auto row = static_cast<Eigen::Index>(i * 6 + j * 2 + z);
        const double t = obs.curve(i, j).times[z];
        // Columns i + 2 (j - 1), i + 2 j, i + 2 (j + 1) in 1-based curve terms hold phi_{-1}, phi_0, phi_1.
        for (Eigen::Index c = 0; c < 10; ++c) {
          const long r = c / 2;
          const auto subject = static_cast<std::size_t>(c % 2);
          const long l = r - static_cast<long>(j) - 1;
          if (subject == i && l >= -1 && l <= 1)
            EXPECT_NEAR(A(row, c), bank.value(0, l, t), 1e-15) << row << "," << c;
          else
            EXPECT_EQ(A(row, c), 0.0) << row << "," << c;
        }
      }
  EXPECT_EQ(design.weights, Eigen::VectorXd::Ones(12));
}

TEST(DesignTest, SingleObservation) {
  const auto grid = TimeGrid::uniform(5);
  Eigen::MatrixXd phi = Eigen::VectorXd::LinSpaced(5, 1.0, 2.0);
  const FilterBank bank(grid, {phi});
  ObservationSet obs(2, 2);
  obs.add(1, 1, 0.5, 3.0);
  const auto design = build_design(obs, bank, ScoreLayout(2, 2, {0}));
  ASSERT_EQ(design.A.rows(), 1);
  ASSERT_EQ(design.A.cols(), 4);
  EXPECT_EQ(design.A.nonZeros(), 1);
  EXPECT_DOUBLE_EQ(Eigen::MatrixXd(design.A)(0, 3), 1.5);
}

TEST(DesignTest, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(31);
  const auto s = small_instance(3, 6, {2, 1}, 31);
  const Eigen::VectorXd xi = smpca::testing::random_real(static_cast<Eigen::Index>(s.layout.size()), 1, rng).col(0);
  const Eigen::VectorXd Axi = s.design.A * xi;
  const ScoreArray scores(s.layout, xi);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      const auto& c = s.obs.curve(i, j);
      for (std::size_t z = 0; z < c.size(); ++z, ++row) {
        double expected = 0.0;
        for (std::size_t k = 0; k < 2; ++k)
          for (long l = -static_cast<long>(s.layout.L(k)); l <= static_cast<long>(s.layout.L(k)); ++l)
            expected += s.bank.value(k, l, c.times[z]) * scores.at(i, static_cast<long>(j) + l, k);
        EXPECT_NEAR(Axi[row], expected, 1e-12);
        EXPECT_NEAR(s.design.y[row], c.values[z] - s.means.at(i, c.times[z], s.bank.grid()), 1e-15);
        EXPECT_DOUBLE_EQ(s.design.weights[row], 1.0 / s.noise[i]);
        EXPECT_LE(s.design.A.row(row).nonZeros(), 3 + 5);
      }
    }
  EXPECT_EQ(row, s.design.A.rows());
}

TEST(DesignTest, RejectsOutOfRangeTimes) {
  const auto grid = TimeGrid::uniform(5);
  const FilterBank bank(grid, {Eigen::MatrixXd::Ones(5, 1)});
  ObservationSet obs(1, 1);
  obs.add(0, 0, 1.5, 0.0);
  EXPECT_THROW(build_design(obs, bank, ScoreLayout(1, 1, {0})), ArgumentError);
  ObservationSet ok(1, 1);
  ok.add(0, 0, 0.5, 0.0);
  EXPECT_THROW(build_design(ok, bank, ScoreLayout(1, 1, {1})), DimensionError);
}

TEST(WhittleTest, QuadraticFormMatchesDftSum) {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t p = 1 + rep % 3, J = 3 + static_cast<std::size_t>(rep);
    const ScoreLayout layout(p, J, {static_cast<std::size_t>(rep % 3), 1});
    const WhittlePrecision Q(random_eta(p, 2, J, rng), layout);
    const auto d = static_cast<Eigen::Index>(layout.size());
    const Eigen::VectorXcd x = smpca::testing::random_complex(d, 1, rng).col(0);
    const double oracle = dft_quadratic(x, layout, Q);
    EXPECT_NEAR(Q.quadratic_form(x).real(), oracle, 1e-10 * oracle);
    EXPECT_NEAR(Q.quadratic_form(x).imag(), 0.0, 1e-10 * oracle);
    EXPECT_NEAR((x.adjoint() * Q.dense() * x)(0, 0).real(), oracle, 1e-10 * oracle);
    const Eigen::VectorXd xr = x.real();
    EXPECT_NEAR(xr.dot(Q.apply_real(xr)), dft_quadratic(xr.cast<cdouble>(), layout, Q), 1e-10 * oracle);
    EXPECT_LT((Q.apply_real(xr) - Q.real_dense() * xr).cwiseAbs().maxCoeff(), 1e-12 * oracle);
  }
}

TEST(WhittleTest, ConstantDensityScalarCase) {
  std::mt19937_64 rng(33);
  const double c = 1.7;
  const ScoreLayout layout(1, 8, {1});
  const WhittlePrecision Q({Eigen::MatrixXd::Constant(1, 8, c)}, layout);
  const Eigen::VectorXcd x = smpca::testing::random_complex(10, 1, rng).col(0);
  EXPECT_NEAR(Q.quadratic_form(x).real(), dft_quadratic(x, layout, Q), 1e-10);
}

TEST(WhittleTest, DoublingDensityHalvesPrecision) {
  std::mt19937_64 rng(34);
  const ScoreLayout layout(2, 5, {1});
  auto eta = random_eta(2, 1, 5, rng);
  const WhittlePrecision Q(eta, layout);
  for (auto& e : eta) e *= 2.0;
  const WhittlePrecision Q2(eta, layout);
  EXPECT_LT((Q.dense() - 2.0 * Q2.dense()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(WhittleTest, WorkedExampleIsHermitianPsd) {
  std::mt19937_64 rng(35);
  const ScoreLayout layout(2, 3, {1});
  const WhittlePrecision Q(random_eta(2, 1, 3, rng), layout);
  const Eigen::MatrixXcd D = Q.dense();
  ASSERT_EQ(D.rows(), 10);
  EXPECT_LT(hermitian_defect(D), 1e-14);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(D).eigenvalues();
  EXPECT_GE(ev.minCoeff(), -1e-10 * ev.maxCoeff());
  EXPECT_LT((Q.real_dense() - D.real()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(WhittleTest, FloorsTinyDensities) {
  const ScoreLayout layout(1, 4, {0});
  Eigen::MatrixXd eta(1, 4);
  eta << 1.0, 0.0, 1e-12, 1.0;
  const WhittlePrecision Q({eta}, layout);
  EXPECT_DOUBLE_EQ(Q.eta(0, 0, 1), 1e-8);
  EXPECT_DOUBLE_EQ(Q.eta(0, 0, 2), 1e-8);
  EXPECT_TRUE(Q.real_dense().allFinite());
  EXPECT_THROW(WhittlePrecision({Eigen::MatrixXd::Zero(1, 4)}, layout), NumericError);
  EXPECT_THROW(WhittlePrecision({eta, eta}, layout), DimensionError);
}

TEST(MapTest, MatchesDenseSolve) {
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    const auto s = small_instance(2 + seed % 2, 5 + seed % 4, {1 + seed % 2}, seed);
    ASSERT_LE(s.layout.size(), 60u);
    const auto result = map_scores(s.design, s.Q);
    const Eigen::MatrixXd A = s.design.A;
    const Eigen::MatrixXd H = A.transpose() * s.design.weights.asDiagonal() * A + s.Q.real_dense();
    const Eigen::VectorXd rhs = A.transpose() * s.design.weights.cwiseProduct(s.design.y);
    const Eigen::VectorXd direct = H.ldlt().solve(rhs);
    EXPECT_LT((result.xi - direct).cwiseAbs().maxCoeff(), 1e-8) << "seed " << seed;
    EXPECT_LE((H * result.xi - rhs).norm(), 1e-8 * rhs.norm());
    EXPECT_FALSE(result.ridge);
  }
}

TEST(MapTest, ObjectiveIsMinimal) {
  std::mt19937_64 rng(51);
  const auto s = small_instance(3, 7, {1, 2}, 51);
  const auto result = map_scores(s.design, s.Q);
  const double best = posterior_objective(s.design, s.Q, result.xi);
  EXPECT_LE(best, posterior_objective(s.design, s.Q, Eigen::VectorXd::Zero(result.xi.size())));
  std::normal_distribution<double> z(0.0, 1e-3);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd x = result.xi;
    for (Eigen::Index a = 0; a < x.size(); ++a) x[a] += z(rng);
    EXPECT_LE(best, posterior_objective(s.design, s.Q, x));
  }
}

TEST(MapTest, ZeroResponseGivesZeroScores) {
  auto s = small_instance(2, 4, {1}, 52);
  s.design.y.setZero();
  const auto result = map_scores(s.design, s.Q);
  EXPECT_EQ(result.xi, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.layout.size())));
}

TEST(MapTest, NegligiblePriorRecoversInverse) {
  const auto grid = TimeGrid::uniform(5);
  const FilterBank bank(grid, {Eigen::VectorXd::LinSpaced(5, 1.0, 3.0)});
  ObservationSet obs(1, 3);
  obs.add(0, 0, 0.0, 2.0);
  obs.add(0, 1, 0.5, -1.0);
  obs.add(0, 2, 1.0, 6.0);
  const ScoreLayout layout(1, 3, {0});
  const auto design = build_design(obs, bank, layout);
  const WhittlePrecision Q({Eigen::MatrixXd::Constant(1, 3, 1e14)}, layout);
  SolverOptions opts;
  opts.tolerance = 1e-12;
  const auto result = map_scores(design, Q, opts);
  EXPECT_NEAR(result.xi[0], 2.0, 1e-8);
  EXPECT_NEAR(result.xi[1], -0.5, 1e-8);
  EXPECT_NEAR(result.xi[2], 2.0, 1e-8);
}

TEST(MapTest, RidgeFallbackOnUnidentifiedColumns) {
  const auto grid = TimeGrid::uniform(5);
  const FilterBank bank(grid, {Eigen::MatrixXd::Ones(5, 1)});
  ObservationSet obs(1, 3);
  obs.add(0, 0, 0.2, 1.0);
  obs.add(0, 2, 0.4, 1.0);  // curve 1 has no data
  const ScoreLayout layout(1, 3, {0});
  const auto design = build_design(obs, bank, layout);
  const WhittlePrecision Q({Eigen::MatrixXd::Constant(1, 3, 1e30)}, layout);
  const auto result = map_scores(design, Q);
  EXPECT_TRUE(result.ridge);
  EXPECT_FALSE(result.warnings.empty());
  EXPECT_TRUE(result.xi.allFinite());
  EXPECT_NEAR(result.xi[1], 0.0, 1e-6);
}

TEST(MapTest, IterationCapRaisesNumericError) {
  // Q couples every pair of curves, so a small system has no fill to drop and the incomplete
  // Cholesky factor is exact; a larger panel keeps one iteration short of convergence.
  const auto s = small_instance(4, 60, {2, 1}, 53);
  SolverOptions opts;
  opts.max_iterations = 1;
  opts.tolerance = 1e-15;
  EXPECT_THROW(map_scores(s.design, s.Q, opts), NumericError);
}

TEST(GradientTest, MatchesCentralDifferences) {
  std::mt19937_64 rng(54);
  const auto s = small_instance(2, 5, {1, 1}, 54);
  const Eigen::VectorXd xi = smpca::testing::random_real(static_cast<Eigen::Index>(s.layout.size()), 1, rng).col(0);
  const Eigen::VectorXd g = posterior_gradient(s.design, s.Q, xi);
  const double h = 1e-5;
  Eigen::VectorXd fd(xi.size());
  for (Eigen::Index a = 0; a < xi.size(); ++a) {
    Eigen::VectorXd up = xi, down = xi;
    up[a] += h;
    down[a] -= h;
    // The gradient is of the log posterior, i.e. minus the objective.
    fd[a] = -(posterior_objective(s.design, s.Q, up) - posterior_objective(s.design, s.Q, down)) / (2 * h);
  }
  EXPECT_LE((g - fd).norm(), 1e-5 * g.norm());
}

TEST(GradientTest, BlockwiseAssemblyAgrees) {
  std::mt19937_64 rng(55);
  const auto s = small_instance(3, 6, {1, 2}, 55);
  const Eigen::VectorXd xi = smpca::testing::random_real(static_cast<Eigen::Index>(s.layout.size()), 1, rng).col(0);
  const Eigen::VectorXd g = posterior_gradient(s.design, s.Q, xi);
  const Eigen::VectorXd b = posterior_gradient_blockwise(s.obs, s.bank, s.layout, s.means, s.noise, s.Q, xi);
  EXPECT_LT((g - b).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, g.cwiseAbs().maxCoeff()));
}

TEST(GradientTest, VanishesAtMap) {
  const auto s = small_instance(2, 6, {1}, 56);
  const auto result = map_scores(s.design, s.Q);
  const Eigen::VectorXd rhs = s.design.A.transpose() * s.design.weights.cwiseProduct(s.design.y);
  EXPECT_LE(posterior_gradient(s.design, s.Q, result.xi).norm(), 1e-8 * rhs.norm());
}
