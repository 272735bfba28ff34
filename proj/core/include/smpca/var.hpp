#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace smpca {

/// Least-squares VAR(P) without intercept, order chosen by AIC.
struct VarFit {
  std::size_t order = 0;
  std::vector<Eigen::MatrixXd> coefficients;  // A_1..A_P, each p x p
  Eigen::MatrixXd innovation;                 // residual covariance
  std::vector<double> aic;                    // AIC for P = 1..P_max
  double spectral_radius = 0.0;
  bool ridge = false;
  std::vector<std::string> warnings;

  std::size_t dimension() const { return static_cast<std::size_t>(innovation.rows()); }
};

/// min(5, floor(T / (3p))), at least 1.
std::size_t default_var_order_cap(std::size_t T, std::size_t p);

/// Fits a VAR to the columns of `series` (p x T). All orders share the effective sample
/// t = P_max..T-1 so that their AIC values are comparable.
VarFit fit_var(const Eigen::MatrixXd& series, std::optional<std::size_t> P_max = std::nullopt);

/// Fits a VAR of one fixed order on the full usable sample.
VarFit fit_var_order(const Eigen::MatrixXd& series, std::size_t order);

/// Iterated forecasts for the `steps` periods after the last column of `history`.
Eigen::MatrixXd forecast_var(const VarFit& fit, const Eigen::MatrixXd& history, std::size_t steps);

/// Largest modulus among the eigenvalues of the companion matrix.
double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& coefficients);

}  // namespace smpca
