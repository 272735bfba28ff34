#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace smpca {

/// Outcome of the generalized cross-validation bandwidth search.
struct BandwidthChoice {
  double bandwidth = 0.0;
  bool from_gcv = false;
  std::vector<double> candidates;
  std::vector<double> scores;
};

/// Epanechnikov local linear smoother for scattered 1-D data.
///
/// Observations sharing an abscissa are pooled into (count, mean) cells; the
/// weighted fit on cells is identical to the fit on raw points.
class LocalLinear1D {
 public:
  LocalLinear1D(std::span<const double> x, std::span<const double> y);

  std::size_t distinct() const { return xs_.size(); }
  std::size_t observations() const { return total_; }

  /// Fitted value at x0. A singular local design widens the bandwidth in steps of 1.5x.
  double fit(double x0, double bandwidth) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& at, double bandwidth) const;

  double gcv(double bandwidth) const;
  /// 10-point log grid search; falls back to 1.5 x median spacing when GCV degenerates.
  BandwidthChoice select_bandwidth() const;

 private:
  struct Local {
    double value;
    double self_weight;
  };
  Local fit_local(double x0, double bandwidth, std::ptrdiff_t self) const;

  std::vector<double> xs_, counts_, means_;
  double within_ss_ = 0.0;
  std::size_t total_ = 0;
};

/// Epanechnikov product-kernel local linear surface smoother for scattered 2-D data.
class LocalLinear2D {
 public:
  LocalLinear2D(std::span<const double> x, std::span<const double> y, std::span<const double> z);

  std::size_t distinct() const { return xs_.size(); }
  std::size_t observations() const { return total_; }

  double fit(double x0, double y0, double bandwidth) const;
  /// Surface on the tensor grid rows x cols.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& rows, const Eigen::VectorXd& cols, double bandwidth) const;
  /// Value at (t0, t0) from a fit in rotated coordinates: linear along the diagonal,
  /// quadratic across it. Removes the curvature bias a plain local linear fit has on a ridge.
  double diagonal(double t0, double bandwidth) const;

  double gcv(double bandwidth) const;
  BandwidthChoice select_bandwidth() const;

 private:
  struct Local {
    double value;
    double self_weight;
  };
  Local fit_local(double x0, double y0, double bandwidth, std::ptrdiff_t self) const;

  std::vector<double> xs_, ys_, counts_, means_;
  double within_ss_ = 0.0;
  std::size_t total_ = 0;
};

/// Log-spaced candidate bandwidths derived from the spacing of the distinct coordinates.
std::vector<double> bandwidth_candidates(std::vector<double> coordinates, std::size_t count = 10);
/// 1.5 x median spacing of the distinct coordinates.
double fallback_bandwidth(std::vector<double> coordinates);

}  // namespace smpca
