#include "smpca/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "smpca/error.hpp"
#include "smpca/local_linear.hpp"
#include "smpca/parallel.hpp"

namespace smpca {

AutocovField::AutocovField(std::vector<std::vector<Eigen::MatrixXd>> lags) : lags_(std::move(lags)) {
  for (const auto& s : lags_)
    if (s.empty() || s.size() != lags_.front().size())
      throw DimensionError("autocovariance field: every subject needs the same lags");
}

bool AutocovField::has_lag(long h) const { return !lags_.empty() && static_cast<std::size_t>(std::labs(h)) <= max_lag(); }

Eigen::MatrixXd AutocovField::lag(std::size_t i, long h) const {
  if (!has_lag(h)) throw ArgumentError("autocovariance lag " + std::to_string(h) + " not estimated");
  const auto& c = lags_.at(i).at(static_cast<std::size_t>(std::labs(h)));
  if (h >= 0) return c;
  return c.transpose();
}

namespace {

double smooth_bandwidth(const SmoothingOptions& options, const auto& smoother) {
  if (options.bandwidth) {
    if (!(*options.bandwidth > 0.0)) throw ArgumentError("bandwidth must be positive");
    return *options.bandwidth;
  }
  return smoother.select_bandwidth().bandwidth;
}

std::vector<std::vector<double>> demeaned(const ObservationSet& obs, std::size_t i, const Eigen::VectorXd& mean,
                                          const TimeGrid& grid) {
  std::vector<std::vector<double>> out(obs.curves());
  for (std::size_t j = 0; j < obs.curves(); ++j) {
    const auto& c = obs.curve(i, j);
    out[j].resize(c.size());
    for (std::size_t z = 0; z < c.size(); ++z) out[j][z] = c.values[z] - grid.interpolate(mean, c.times[z]);
  }
  return out;
}

}  // namespace

Eigen::VectorXd estimate_mean(const ObservationSet& obs, std::size_t i, const TimeGrid& grid,
                              const SmoothingOptions& options) {
  std::vector<double> t, y;
  std::set<double> distinct;
  for (std::size_t j = 0; j < obs.curves(); ++j) {
    const auto& c = obs.curve(i, j);
    t.insert(t.end(), c.times.begin(), c.times.end());
    y.insert(y.end(), c.values.begin(), c.values.end());
    distinct.insert(c.times.begin(), c.times.end());
  }
  if (distinct.size() < 3)
    throw InsufficientDataError("subject " + std::to_string(i + 1) + ": fewer than 3 distinct observation times");
  const LocalLinear1D smoother(t, y);
  return smoother.evaluate(grid.points(), smooth_bandwidth(options, smoother));
}

MeanFunctions estimate_means(const ObservationSet& obs, const TimeGrid& grid, const SmoothingOptions& options) {
  MeanFunctions out;
  for (std::size_t i = 0; i < obs.subjects(); ++i) out.subject.push_back(estimate_mean(obs, i, grid, options));
  return out;
}

namespace {

// Raw cross products Y_i(j+h)z1 * Y_ijz2 over all pairs; same-curve diagonal pairs dropped at lag 0.
LocalLinear2D lag_smoother(const ObservationSet& obs, std::size_t i, const Eigen::VectorXd& mean, long h,
                           const TimeGrid& grid) {
  const auto J = static_cast<long>(obs.curves());
  const auto resid = demeaned(obs, i, mean, grid);
  std::vector<double> ts, ss, prod;
  for (long j = 0; j + h < J; ++j) {
    const auto& lead = obs.curve(i, static_cast<std::size_t>(j + h));
    const auto& base = obs.curve(i, static_cast<std::size_t>(j));
    const auto& rl = resid[static_cast<std::size_t>(j + h)];
    const auto& rb = resid[static_cast<std::size_t>(j)];
    for (std::size_t z1 = 0; z1 < lead.size(); ++z1)
      for (std::size_t z2 = 0; z2 < base.size(); ++z2) {
        if (h == 0 && z1 == z2) continue;
        ts.push_back(lead.times[z1]);
        ss.push_back(base.times[z2]);
        prod.push_back(rl[z1] * rb[z2]);
      }
  }
  if (prod.empty())
    throw InsufficientDataError("subject " + std::to_string(i + 1) + ": no observation pairs at lag " +
                                std::to_string(h));
  return LocalLinear2D(ts, ss, prod);
}

}  // namespace

Eigen::MatrixXd estimate_autocov(const ObservationSet& obs, std::size_t i, const Eigen::VectorXd& mean, long h,
                                 const TimeGrid& grid, const SmoothingOptions& options) {
  const auto J = static_cast<long>(obs.curves());
  if (std::labs(h) > J - 1) throw ArgumentError("lag exceeds J - 1");
  if (h < 0) return estimate_autocov(obs, i, mean, -h, grid, options).transpose();

  const LocalLinear2D smoother = lag_smoother(obs, i, mean, h, grid);
  Eigen::MatrixXd surface = smoother.evaluate(grid.points(), grid.points(), smooth_bandwidth(options, smoother));
  if (h == 0) surface = 0.5 * (surface + surface.transpose()).eval();
  return surface;
}

std::vector<Eigen::MatrixXd> estimate_autocov(const ObservationSet& obs, const MeanFunctions& means, long h,
                                              const TimeGrid& grid, const SmoothingOptions& options) {
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t i = 0; i < obs.subjects(); ++i)
    out.push_back(estimate_autocov(obs, i, means.subject.at(i), h, grid, options));
  return out;
}

AutocovField estimate_autocov_field(const ObservationSet& obs, const MeanFunctions& means, std::size_t max_lag,
                                    const TimeGrid& grid, const SmoothingOptions& options, std::size_t threads) {
  const std::size_t p = obs.subjects();
  if (max_lag + 1 > obs.curves()) throw ArgumentError("maximum lag exceeds J - 1");
  std::vector<std::vector<Eigen::MatrixXd>> lags(p, std::vector<Eigen::MatrixXd>(max_lag + 1));
  parallel_for(p * (max_lag + 1), threads, [&](std::size_t n) {
    const std::size_t i = n / (max_lag + 1), h = n % (max_lag + 1);
    lags[i][h] = estimate_autocov(obs, i, means.subject.at(i), static_cast<long>(h), grid, options);
  });
  return AutocovField(std::move(lags));
}

double pooled_sample_variance(const ObservationSet& obs) {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < obs.subjects(); ++i)
    for (std::size_t j = 0; j < obs.curves(); ++j)
      for (double y : obs.curve(i, j).values) {
        sum += y;
        sum_sq += y * y;
        ++n;
      }
  if (n < 2) return 0.0;
  const double mean = sum / static_cast<double>(n);
  return std::max(0.0, (sum_sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
}

namespace {

// Fallback: average of V(t) - C(t,t) over the central half of [0,1].
double diagonal_gap(const ObservationSet& obs, std::size_t i, const Eigen::VectorXd& mean, const TimeGrid& grid,
                    const std::vector<double>& t, const std::vector<double>& sq, const SmoothingOptions& options) {
  const LocalLinear1D smoother(t, sq);
  const Eigen::VectorXd total = smoother.evaluate(grid.points(), smooth_bandwidth(options, smoother));
  const LocalLinear2D cov = lag_smoother(obs, i, mean, 0, grid);
  // The quadratic term absorbs the cross-diagonal curvature, so a wider window than GCV's is affordable.
  const double hc = 1.5 * smooth_bandwidth(options, cov);
  double acc = 0.0, wsum = 0.0;
  for (int pass = 0; pass < 2 && wsum <= 0.0; ++pass)
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const double tm = grid[m];
      if (pass == 0 && (tm < 0.25 || tm > 0.75)) continue;
      const auto mi = static_cast<Eigen::Index>(m);
      acc += grid.weights()[mi] * (total[mi] - cov.diagonal(tm, hc));
      wsum += grid.weights()[mi];
    }
  return acc / wsum;
}

}  // namespace

double estimate_noise_variance(const ObservationSet& obs, std::size_t i, const Eigen::VectorXd& mean,
                               const TimeGrid& grid, double floor, const SmoothingOptions& options) {
  const auto resid = demeaned(obs, i, mean, grid);
  std::vector<double> t, sq, gaps;
  for (std::size_t j = 0; j < obs.curves(); ++j) {
    const auto& c = obs.curve(i, j);
    for (std::size_t z = 0; z < c.size(); ++z) {
      t.push_back(c.times[z]);
      sq.push_back(resid[j][z] * resid[j][z]);
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t z2 = 0; z2 < c.size(); ++z2)
        if (z2 != z && c.times[z2] != c.times[z]) nearest = std::min(nearest, std::abs(c.times[z2] - c.times[z]));
      if (std::isfinite(nearest)) gaps.push_back(nearest);
    }
  }
  if (t.empty()) throw InsufficientDataError("subject " + std::to_string(i + 1) + " has no observations");

  // Within-curve semivariogram 0.5 (r_z - r_z')^2 = sigma^2 + c d^2 + o(d^2) for smooth curves;
  // the intercept over close pairs is the nugget. Differencing inside a curve cancels the
  // curve-level variation that makes V(t) - C(t,t) so noisy.
  double estimate = std::numeric_limits<double>::quiet_NaN();
  if (!gaps.empty()) {
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    const double dmax = 2.5 * gaps[gaps.size() / 2];
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    std::size_t pairs = 0;
    for (std::size_t j = 0; j < obs.curves(); ++j) {
      const auto& c = obs.curve(i, j);
      for (std::size_t z1 = 0; z1 < c.size(); ++z1)
        for (std::size_t z2 = z1 + 1; z2 < c.size(); ++z2) {
          const double d = std::abs(c.times[z1] - c.times[z2]);
          if (d > dmax) continue;
          const double diff = resid[j][z1] - resid[j][z2];
          const Eigen::Vector2d x(1.0, d * d);
          A += x * x.transpose();
          b += x * (0.5 * diff * diff);
          ++pairs;
        }
    }
    const Eigen::LDLT<Eigen::Matrix2d> ldlt(A);
    if (pairs >= 10 && ldlt.info() == Eigen::Success && std::abs(A.determinant()) > 1e-12 * A.squaredNorm())
      estimate = ldlt.solve(b)[0];
  }
  if (!std::isfinite(estimate)) estimate = diagonal_gap(obs, i, mean, grid, t, sq, options);

  double mean_sq = 0.0;
  for (double v : sq) mean_sq += v;
  mean_sq /= static_cast<double>(sq.size());
  return std::max({floor, options.noise_floor_ratio * mean_sq, estimate});
}

std::vector<double> estimate_noise_variances(const ObservationSet& obs, const MeanFunctions& means, const TimeGrid& grid,
                                             const SmoothingOptions& options) {
  double floor = 1e-8 * pooled_sample_variance(obs);
  if (!(floor > 0.0)) floor = 1e-12;
  std::vector<double> out;
  for (std::size_t i = 0; i < obs.subjects(); ++i)
    out.push_back(estimate_noise_variance(obs, i, means.subject.at(i), grid, floor, options));
  return out;
}

}  // namespace smpca
