#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace smpca {

using cdouble = std::complex<double>;

/// Ordered evaluation points on [0,1] with trapezoid quadrature weights.
class TimeGrid {
 public:
  TimeGrid() = default;
  /// Builds trapezoid weights for arbitrary strictly increasing points in [0,1].
  explicit TimeGrid(Eigen::VectorXd points);

  static TimeGrid uniform(std::size_t count);

  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.size()); }
  double operator[](std::size_t m) const { return points_[static_cast<Eigen::Index>(m)]; }

  /// Linear interpolation of a grid-sampled function at t (clamped to the grid span).
  double interpolate(const Eigen::VectorXd& values, double t) const;

  bool same_as(const TimeGrid& other) const;

 private:
  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
};

/// Frequency nodes on [-pi, pi], closed under negation.
///
/// The quadrature nodes are a uniform grid with periodic trapezoid weights. The
/// Whittle set {2 pi j / J} (folded into (-pi, pi]) is merged in; nodes that are
/// not on the uniform lattice carry zero weight, so they are evaluation-only and
/// do not perturb the quadrature.
class FrequencyGrid {
 public:
  FrequencyGrid() = default;

  /// `half_intervals` uniform intervals on [0, pi]; `whittle_length` = J (0 for none).
  FrequencyGrid(std::size_t half_intervals, std::size_t whittle_length);

  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.size()); }
  double operator[](std::size_t a) const { return points_[static_cast<Eigen::Index>(a)]; }

  /// Index of the node holding -omega for node a.
  std::size_t mirror(std::size_t a) const { return mirror_[a]; }
  /// Indices of nodes with omega >= 0, ascending in omega.
  const std::vector<std::size_t>& nonnegative() const { return nonnegative_; }
  /// Index of the node holding omega_j = 2 pi j / J, for j = 1..J (entry j-1).
  const std::vector<std::size_t>& whittle() const { return whittle_; }
  std::size_t whittle_length() const { return whittle_.size(); }
  std::size_t zero_index() const { return zero_; }
  bool symmetric() const { return true; }

  bool same_as(const FrequencyGrid& other) const;

 private:
  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
  std::vector<std::size_t> mirror_;
  std::vector<std::size_t> nonnegative_;
  std::vector<std::size_t> whittle_;
  std::size_t zero_ = 0;
};

struct Grids {
  TimeGrid time;
  FrequencyGrid frequency;
};

/// Uniform time grid with `time_points` nodes and a symmetric frequency grid of at
/// least `freq_points` nodes containing the Whittle set for series length J.
Grids build_uniform_grids(std::size_t time_points, std::size_t freq_points, std::size_t J);

/// Trapezoid discretisation of <f, g> = int conj(f) g dt.
cdouble trapezoid_inner_product(const Eigen::VectorXcd& f, const Eigen::VectorXcd& g,
                                const TimeGrid& grid);
double trapezoid_inner_product(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                               const TimeGrid& grid);

/// Squared L2 norm under the grid quadrature.
double squared_norm(const Eigen::VectorXd& f, const TimeGrid& grid);
double squared_norm(const Eigen::VectorXcd& f, const TimeGrid& grid);

/// Largest |K(a,b) - conj(K(b,a))|.
double hermitian_defect(const Eigen::MatrixXcd& kernel);

}  // namespace smpca
