#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "smpca/grid.hpp"
#include "smpca/observations.hpp"
#include "smpca/tasks.hpp"

namespace smpca {

/// Parameters of the synthetic functional time series generator.
struct SimConfig {
  std::size_t p = 5;
  std::size_t J = 60;
  /// Extra curves generated after J (held out for forecasting).
  std::size_t holdout = 0;
  std::size_t K = 1;
  std::size_t L = 1;
  double rho = 0.5;
  int case_id = 1;
  std::size_t n_min = 5;
  std::size_t n_max = 10;
  std::size_t grid_points = 31;
  double kappa = 3.0;
  double r1 = 0.1;
  double r2 = 0.35;
  double t_df = 5.0;
  /// Noise variance as a fraction of E||eps_i1||^2; 0 gives noiseless data.
  double noise_ratio = 0.1;
  std::size_t burn_in = 200;
  std::size_t calibration_curves = 2000;
  std::uint64_t seed = 1;

  std::size_t total_curves() const { return J + holdout; }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Random streams keyed by purpose so that changing one step never shifts another.
enum class Stream : std::uint64_t { Precision = 1, Scores = 2, Calibration = 3, Sites = 4, Noise = 5 };
std::mt19937_64 make_stream(std::uint64_t seed, Stream purpose, std::uint64_t extra = 0);

/// Innovation precision with graphical structure.
struct PrecisionSpec {
  Eigen::MatrixXd theta;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // i1 < i2, zero-based
  std::size_t attempts = 0;
};

/// Diagonal exp(k/10)/5; edges with probability kappa/p carry R exp(k/10)/5,
/// R ~ U([-r2,-r1] u [r1,r2]). Redrawn until positive definite (at most 100 attempts).
/// `k` is 1-based.
PrecisionSpec gen_precision(std::size_t p, std::size_t k, double kappa, double r1, double r2, std::mt19937_64& rng);

/// Score paths after a burn-in from zero; per k a p x T matrix.
/// Case 3 adds sin(xi) to the linear recursion.
std::vector<Eigen::MatrixXd> gen_scores(const std::vector<PrecisionSpec>& precision, double rho, std::size_t T,
                                        int case_id, std::size_t burn_in, std::mt19937_64& rng);

/// Lag weights w_l = sqrt(e^{-|l|/2} / sum), l = -L..L.
Eigen::VectorXd lag_weights(std::size_t L);

/// Fourier function used for slot s: sqrt2 sin(2 pi r t) for even s, sqrt2 cos(2 pi r t) for odd s, r = s/2 + 1.
double fourier_basis(std::size_t slot, double t);

/// phi_ikl(t) = fourier(k (2L+1) + l + L)(t) (1 + sin(i t / p)), i 1-based in the fluctuation.
double true_filter(std::size_t p, std::size_t i, std::size_t k, long l, std::size_t L, double t);

/// True filters on a grid: [i][k] is M x (2L+1) (unweighted), plus the lag weights.
struct BasisSet {
  Eigen::VectorXd weights;
  std::vector<std::vector<Eigen::MatrixXd>> filters;
};
BasisSet gen_basis(std::size_t p, std::size_t K, std::size_t L, const TimeGrid& grid);

/// Latent curves, true scores and noisy samples.
struct TruthPanel {
  SimConfig config;
  std::vector<Eigen::MatrixXd> precision;  // per k
  std::vector<Eigen::MatrixXd> scores;     // per k: p x (total_curves + 2L), column r is curve r - L
  std::vector<double> energy;              // calibrated E||eps_i1||^2
  std::vector<double> noise_variance;      // per subject
  ObservationSet observations;             // all total_curves curves

  /// eps_ij(t) from the stored scores (j zero-based).
  double latent(std::size_t i, std::size_t j, double t) const;
  /// Latent curves first..first+count-1 on a grid.
  CurvePanel latent_panel(const TimeGrid& grid, std::size_t first, std::size_t count) const;
};

TruthPanel gen_panel(const SimConfig& config);

}  // namespace smpca
