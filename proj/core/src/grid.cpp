#include "smpca/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "smpca/error.hpp"

namespace smpca {

TimeGrid::TimeGrid(Eigen::VectorXd points) : points_(std::move(points)) {
  const Eigen::Index n = points_.size();
  if (n < 2) throw ArgumentError("time grid needs at least 2 points");
  for (Eigen::Index m = 0; m < n; ++m) {
    if (!std::isfinite(points_[m]) || points_[m] < 0.0 || points_[m] > 1.0)
      throw ArgumentError("time grid point outside [0,1]: " + std::to_string(points_[m]));
    if (m > 0 && !(points_[m] > points_[m - 1]))
      throw ArgumentError("time grid points must be strictly increasing");
  }
  weights_.resize(n);
  weights_[0] = 0.5 * (points_[1] - points_[0]);
  weights_[n - 1] = 0.5 * (points_[n - 1] - points_[n - 2]);
  for (Eigen::Index m = 1; m + 1 < n; ++m) weights_[m] = 0.5 * (points_[m + 1] - points_[m - 1]);
}

TimeGrid TimeGrid::uniform(std::size_t count) {
  if (count < 2) throw ArgumentError("time grid needs at least 2 points");
  Eigen::VectorXd pts(static_cast<Eigen::Index>(count));
  for (std::size_t m = 0; m < count; ++m)
    pts[static_cast<Eigen::Index>(m)] = static_cast<double>(m) / static_cast<double>(count - 1);
  return TimeGrid(std::move(pts));
}

double TimeGrid::interpolate(const Eigen::VectorXd& values, double t) const {
  if (values.size() != points_.size()) throw DimensionError("interpolation: value/grid size mismatch");
  const Eigen::Index n = points_.size();
  if (t <= points_[0]) return values[0];
  if (t >= points_[n - 1]) return values[n - 1];
  const double* begin = points_.data();
  const auto hi = static_cast<Eigen::Index>(std::upper_bound(begin, begin + n, t) - begin);
  const Eigen::Index lo = hi - 1;
  const double frac = (t - points_[lo]) / (points_[hi] - points_[lo]);
  return (1.0 - frac) * values[lo] + frac * values[hi];
}

bool TimeGrid::same_as(const TimeGrid& other) const {
  return points_.size() == other.points_.size() && points_ == other.points_;
}

FrequencyGrid::FrequencyGrid(std::size_t half_intervals, std::size_t whittle_length) {
  if (half_intervals < 1) throw ArgumentError("frequency grid needs at least one interval on [0, pi]");
  constexpr double pi = std::numbers::pi;
  const double step = pi / static_cast<double>(half_intervals);

  struct Node {
    double omega;
    double weight;
  };
  std::vector<Node> half;
  half.reserve(half_intervals + 1 + whittle_length);
  for (std::size_t a = 0; a <= half_intervals; ++a) {
    const double w = (a == half_intervals) ? 0.5 * step : step;
    half.push_back({a == half_intervals ? pi : step * static_cast<double>(a), w});
  }

  // Folded Whittle frequencies 2 pi j / J mapped into (-pi, pi].
  std::vector<double> folded(whittle_length);
  for (std::size_t j = 1; j <= whittle_length; ++j) {
    double omega = 2.0 * pi * static_cast<double>(j) / static_cast<double>(whittle_length);
    if (j == whittle_length) omega = 0.0;
    if (omega > pi + 1e-14) omega -= 2.0 * pi;
    folded[j - 1] = omega;
  }
  const double snap = 1e-12;
  auto find_half = [&](double abs_omega) -> std::ptrdiff_t {
    for (std::size_t a = 0; a < half.size(); ++a)
      if (std::abs(half[a].omega - abs_omega) <= snap) return static_cast<std::ptrdiff_t>(a);
    return -1;
  };
  for (double omega : folded) {
    const double abs_omega = std::min(std::abs(omega), pi);
    if (find_half(abs_omega) < 0) half.push_back({abs_omega, 0.0});
  }
  std::sort(half.begin(), half.end(), [](const Node& x, const Node& y) { return x.omega < y.omega; });

  const std::size_t nh = half.size();
  const std::size_t n = 2 * nh - 1;
  points_.resize(static_cast<Eigen::Index>(n));
  weights_.resize(static_cast<Eigen::Index>(n));
  mirror_.resize(n);
  for (std::size_t a = 0; a < nh; ++a) {
    const std::size_t pos = nh - 1 + a;
    const std::size_t neg = nh - 1 - a;
    points_[static_cast<Eigen::Index>(pos)] = half[a].omega;
    points_[static_cast<Eigen::Index>(neg)] = -half[a].omega;
    weights_[static_cast<Eigen::Index>(pos)] = half[a].weight;
    weights_[static_cast<Eigen::Index>(neg)] = half[a].weight;
    mirror_[pos] = neg;
    mirror_[neg] = pos;
  }
  zero_ = nh - 1;
  points_[static_cast<Eigen::Index>(zero_)] = 0.0;
  nonnegative_.resize(nh);
  for (std::size_t a = 0; a < nh; ++a) nonnegative_[a] = nh - 1 + a;

  whittle_.resize(whittle_length);
  for (std::size_t j = 0; j < whittle_length; ++j) {
    const double omega = folded[j];
    const double abs_omega = std::min(std::abs(omega), pi);
    std::size_t a = 0;
    double best = std::abs(half[0].omega - abs_omega);
    for (std::size_t b = 1; b < nh; ++b) {
      const double d = std::abs(half[b].omega - abs_omega);
      if (d < best) {
        best = d;
        a = b;
      }
    }
    whittle_[j] = omega < 0.0 ? nh - 1 - a : nh - 1 + a;
  }
}

bool FrequencyGrid::same_as(const FrequencyGrid& other) const {
  return points_.size() == other.points_.size() && points_ == other.points_ &&
         weights_ == other.weights_ && whittle_ == other.whittle_;
}

Grids build_uniform_grids(std::size_t time_points, std::size_t freq_points, std::size_t J) {
  if (time_points < 2) throw ArgumentError("M_t must be at least 2");
  if (freq_points < 2) throw ArgumentError("M_omega must be at least 2");
  if (J < 1) throw ArgumentError("J must be at least 1");
  const std::size_t half = std::max<std::size_t>(1, freq_points / 2);
  return Grids{TimeGrid::uniform(time_points), FrequencyGrid(half, J)};
}

cdouble trapezoid_inner_product(const Eigen::VectorXcd& f, const Eigen::VectorXcd& g,
                                const TimeGrid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (f.size() != n || g.size() != n) throw DimensionError("inner product: grid mismatch");
  cdouble acc{0.0, 0.0};
  for (Eigen::Index m = 0; m < n; ++m) acc += grid.weights()[m] * std::conj(f[m]) * g[m];
  return acc;
}

double trapezoid_inner_product(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const TimeGrid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (f.size() != n || g.size() != n) throw DimensionError("inner product: grid mismatch");
  return (grid.weights().array() * f.array() * g.array()).sum();
}

double squared_norm(const Eigen::VectorXd& f, const TimeGrid& grid) {
  return trapezoid_inner_product(f, f, grid);
}

double squared_norm(const Eigen::VectorXcd& f, const TimeGrid& grid) {
  return trapezoid_inner_product(f, f, grid).real();
}

double hermitian_defect(const Eigen::MatrixXcd& kernel) {
  if (kernel.rows() != kernel.cols()) throw DimensionError("kernel is not square");
  return (kernel - kernel.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace smpca
