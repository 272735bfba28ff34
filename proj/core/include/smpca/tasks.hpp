#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smpca/pipeline.hpp"
#include "smpca/var.hpp"

namespace smpca {

/// Curves sampled on a TimeGrid: per subject a (curves x M_t) matrix.
struct CurvePanel {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> subject;

  std::size_t subjects() const { return subject.size(); }
  std::size_t curves() const { return subject.empty() ? 0 : static_cast<std::size_t>(subject.front().rows()); }
  Eigen::VectorXd curve(std::size_t i, std::size_t j) const { return subject.at(i).row(static_cast<Eigen::Index>(j)).transpose(); }
};

/// Fitted value of X_ij(t) = mu_i(t) + sum_k sum_l phi_kl(t) xi_{i(j+l)k}; j may index any
/// curve whose scores are stored.
double reconstruct_value(const FittedModel& model, std::size_t i, long j, double t);

/// Reconstructed curves for j = 0..J-1 on the model's time grid.
CurvePanel impute(const FittedModel& model);

/// One VAR per group and component.
struct ForecastModel {
  std::vector<std::vector<VarFit>> fits;  // [group][k]
  std::vector<std::string> warnings;
};

ForecastModel fit_var_models(const FittedModel& model, std::optional<std::size_t> P_max = std::nullopt);

/// Curves J..J+horizon-1 (zero-based), extending every score series by iterated VAR forecasts.
CurvePanel forecast(const FittedModel& model, const ForecastModel& var, std::size_t horizon);

enum class RefitMode { Full, ScoresOnly };
std::string refit_name(RefitMode mode);
RefitMode parse_refit(const std::string& name);

/// One-step forecasts of curves J..J+P-1: forecast m uses only curves [0, J+m-1).
/// `Full` reruns the whole pipeline each step; `ScoresOnly` keeps the moments estimated
/// from the first J curves and refits the remaining steps.
CurvePanel rolling_one_step_forecasts(const ObservationSet& obs, std::size_t J, std::size_t P,
                                      const FitOptions& options, RefitMode mode,
                                      std::optional<std::size_t> P_max = std::nullopt);

/// E ||eps_j - sum_k sum_l phi_kl xi_{j+l,k}||^2 summed over subjects, with extraction filters v:
/// xi_jk = sum_l <eps_{j-l}, v_kl>. `lags[i]` maps h to C_iih = cov(eps_{i(j+h)}, eps_ij) on the grid;
/// lags absent from the map are zero. Filters are per k, M_t x (2L+1).
double population_reconstruction_mse(const std::vector<std::map<long, Eigen::MatrixXd>>& lags,
                                     const std::vector<Eigen::MatrixXd>& phi, const std::vector<Eigen::MatrixXd>& v,
                                     const TimeGrid& grid);

}  // namespace smpca
