#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "smpca/grid.hpp"
#include "smpca/observations.hpp"

namespace smpca {

struct SmoothingOptions {
  /// Fixed bandwidth; empty selects by GCV.
  std::optional<double> bandwidth;
  /// Lower bound on each noise variance as a fraction of the subject's mean squared residual.
  double noise_floor_ratio = 0.02;
};

/// Per-subject mean functions sampled on a TimeGrid.
struct MeanFunctions {
  std::vector<Eigen::VectorXd> subject;

  std::size_t subjects() const { return subject.size(); }
  double at(std::size_t i, double t, const TimeGrid& grid) const { return grid.interpolate(subject[i], t); }
};

/// Smoothed lagged autocovariance surfaces C_iih(t,s) for h = 0..max_lag.
/// Negative lags are served as transposes, so C_ii(-h)(t,s) = C_iih(s,t) exactly.
class AutocovField {
 public:
  AutocovField() = default;
  explicit AutocovField(std::vector<std::vector<Eigen::MatrixXd>> lags);

  std::size_t subjects() const { return lags_.size(); }
  /// Largest stored non-negative lag.
  std::size_t max_lag() const { return lags_.empty() ? 0 : lags_.front().size() - 1; }
  bool has_lag(long h) const;
  Eigen::MatrixXd lag(std::size_t i, long h) const;
  const Eigen::MatrixXd& nonnegative_lag(std::size_t i, std::size_t h) const { return lags_.at(i).at(h); }

 private:
  std::vector<std::vector<Eigen::MatrixXd>> lags_;
};

/// Local linear mean of subject i, pooling all of its curves.
Eigen::VectorXd estimate_mean(const ObservationSet& obs, std::size_t i, const TimeGrid& grid,
                              const SmoothingOptions& options = {});
MeanFunctions estimate_means(const ObservationSet& obs, const TimeGrid& grid, const SmoothingOptions& options = {});

/// Lag-h surface for one subject; lag-0 excludes same-point squares and is symmetrised.
Eigen::MatrixXd estimate_autocov(const ObservationSet& obs, std::size_t i, const Eigen::VectorXd& mean,
                                 long h, const TimeGrid& grid, const SmoothingOptions& options = {});
/// Lag-h surfaces for all subjects.
std::vector<Eigen::MatrixXd> estimate_autocov(const ObservationSet& obs, const MeanFunctions& means, long h,
                                              const TimeGrid& grid, const SmoothingOptions& options = {});
AutocovField estimate_autocov_field(const ObservationSet& obs, const MeanFunctions& means, std::size_t max_lag,
                                    const TimeGrid& grid, const SmoothingOptions& options = {},
                                    std::size_t threads = 1);

/// Pooled sample variance of every observed value.
double pooled_sample_variance(const ObservationSet& obs);

/// Measurement-error variance: intercept of a least-squares fit of the within-curve
/// semivariogram 0.5 (r_z - r_z')^2 on (1, d^2) over pairs closer than 2.5 x the median
/// nearest-neighbour gap. Designs without enough close pairs fall back to the average of
/// V(t) - C_ii0(t,t) over the central half of [0,1]. Never below `floor` nor below
/// options.noise_floor_ratio times the mean squared demeaned value.
double estimate_noise_variance(const ObservationSet& obs, std::size_t i, const Eigen::VectorXd& mean,
                               const TimeGrid& grid, double floor, const SmoothingOptions& options = {});
/// Per-subject noise variances, floored at 1e-8 x the pooled sample variance.
std::vector<double> estimate_noise_variances(const ObservationSet& obs, const MeanFunctions& means, const TimeGrid& grid,
                                             const SmoothingOptions& options = {});

}  // namespace smpca
