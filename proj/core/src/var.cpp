#include "smpca/var.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "smpca/error.hpp"

namespace smpca {

namespace {

struct OlsResult {
  std::vector<Eigen::MatrixXd> coefficients;
  Eigen::MatrixXd innovation;
  bool ridge = false;
};

// Regresses x_t on x_{t-1..t-order} for t in [start, T).
OlsResult ols(const Eigen::MatrixXd& series, std::size_t order, std::size_t start) {
  const Eigen::Index p = series.rows();
  const Eigen::Index T = series.cols();
  const Eigen::Index n = T - static_cast<Eigen::Index>(start);
  const Eigen::Index q = p * static_cast<Eigen::Index>(order);
  Eigen::MatrixXd Y = series.rightCols(n);
  Eigen::MatrixXd Z(q, n);
  for (std::size_t lag = 1; lag <= order; ++lag)
    Z.middleRows(p * static_cast<Eigen::Index>(lag - 1), p) =
        series.middleCols(static_cast<Eigen::Index>(start - lag), n);

  OlsResult out;
  Eigen::MatrixXd gram = Z * Z.transpose();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  if (lu.rank() < q) {
    const double mean_diag = gram.trace() / static_cast<double>(q);
    gram.diagonal().array() += 1e-8 * (mean_diag > 0.0 ? mean_diag : 1.0);
    out.ridge = true;
  }
  const Eigen::MatrixXd B = gram.ldlt().solve(Z * Y.transpose()).transpose();  // p x q
  for (std::size_t lag = 0; lag < order; ++lag)
    out.coefficients.push_back(B.middleCols(p * static_cast<Eigen::Index>(lag), p));
  const Eigen::MatrixXd resid = Y - B * Z;
  out.innovation = resid * resid.transpose() / static_cast<double>(n);
  return out;
}

double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd a = m;
  const double scale = std::max(a.trace() / static_cast<double>(a.rows()), 1e-300);
  a.diagonal().array() += 1e-12 * scale;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  return ldlt.vectorD().array().max(1e-300).log().sum();
}

void finish(VarFit& fit) {
  fit.spectral_radius = companion_spectral_radius(fit.coefficients);
  if (fit.ridge) fit.warnings.emplace_back("VAR regressors are rank deficient; used a 1e-8 ridge");
  if (fit.spectral_radius > 1.2)
    fit.warnings.emplace_back("explosive VAR fit (companion spectral radius " + std::to_string(fit.spectral_radius) + ")");
  else if (fit.spectral_radius >= 1.0)
    fit.warnings.emplace_back("non-stationary VAR fit (companion spectral radius " + std::to_string(fit.spectral_radius) + ")");
}

}  // namespace

std::size_t default_var_order_cap(std::size_t T, std::size_t p) {
  return std::max<std::size_t>(1, std::min<std::size_t>(5, T / (3 * std::max<std::size_t>(p, 1))));
}

VarFit fit_var(const Eigen::MatrixXd& series, std::optional<std::size_t> P_max) {
  const auto p = static_cast<std::size_t>(series.rows());
  const auto T = static_cast<std::size_t>(series.cols());
  const std::size_t cap = P_max.value_or(default_var_order_cap(T, p));
  if (p == 0 || cap == 0) throw ArgumentError("VAR needs a nonempty series and P_max >= 1");
  if (T <= p * cap + 1) throw InsufficientDataError("VAR series too short: need T > p * P_max + 1");

  const double T_eff = static_cast<double>(T - cap);
  VarFit best;
  double best_aic = std::numeric_limits<double>::infinity();
  std::vector<double> aic;
  bool any_ridge = false;
  for (std::size_t P = 1; P <= cap; ++P) {
    OlsResult r = ols(series, P, cap);
    any_ridge = any_ridge || r.ridge;
    const double value = log_det_spd(r.innovation) + 2.0 * static_cast<double>(P * p * p) / T_eff;
    aic.push_back(value);
    if (value < best_aic) {
      best_aic = value;
      best.order = P;
      best.coefficients = std::move(r.coefficients);
      best.innovation = std::move(r.innovation);
    }
  }
  best.aic = std::move(aic);
  best.ridge = any_ridge;
  finish(best);
  return best;
}

VarFit fit_var_order(const Eigen::MatrixXd& series, std::size_t order) {
  const auto p = static_cast<std::size_t>(series.rows());
  const auto T = static_cast<std::size_t>(series.cols());
  if (order == 0) throw ArgumentError("VAR order must be at least 1");
  if (T <= p * order + 1) throw InsufficientDataError("VAR series too short: need T > p * order + 1");
  OlsResult r = ols(series, order, order);
  VarFit fit;
  fit.order = order;
  fit.coefficients = std::move(r.coefficients);
  fit.innovation = std::move(r.innovation);
  fit.ridge = r.ridge;
  fit.aic.push_back(log_det_spd(fit.innovation) +
                    2.0 * static_cast<double>(order * p * p) / static_cast<double>(T - order));
  finish(fit);
  return fit;
}

Eigen::MatrixXd forecast_var(const VarFit& fit, const Eigen::MatrixXd& history, std::size_t steps) {
  const Eigen::Index p = history.rows();
  if (static_cast<std::size_t>(p) != fit.dimension()) throw DimensionError("forecast history has the wrong dimension");
  if (static_cast<std::size_t>(history.cols()) < fit.order) throw InsufficientDataError("forecast history shorter than the VAR order");
  Eigen::MatrixXd path(p, history.cols() + static_cast<Eigen::Index>(steps));
  path.leftCols(history.cols()) = history;
  for (Eigen::Index t = history.cols(); t < path.cols(); ++t) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(p);
    for (std::size_t lag = 1; lag <= fit.order; ++lag)
      next += fit.coefficients[lag - 1] * path.col(t - static_cast<Eigen::Index>(lag));
    path.col(t) = next;
  }
  return path.rightCols(static_cast<Eigen::Index>(steps));
}

double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& coefficients) {
  if (coefficients.empty()) return 0.0;
  const Eigen::Index p = coefficients.front().rows();
  const Eigen::Index n = p * static_cast<Eigen::Index>(coefficients.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t lag = 0; lag < coefficients.size(); ++lag)
    companion.block(0, p * static_cast<Eigen::Index>(lag), p, p) = coefficients[lag];
  if (n > p) companion.bottomLeftCorner(n - p, n - p).setIdentity();
  const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace smpca
