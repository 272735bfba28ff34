#include "smpca/local_linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "smpca/error.hpp"

namespace smpca {

namespace {

constexpr int kMaxWidening = 40;
constexpr double kWidenFactor = 1.5;

inline double epanechnikov(double u) { return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0; }

double gcv_score(double rss, double trace, double n) {
  if (!(trace < n)) return std::numeric_limits<double>::infinity();
  const double denom = (n - trace) * (n - trace);
  return n * rss / denom;
}

std::vector<double> distinct_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

std::vector<double> bandwidth_candidates(std::vector<double> coordinates, std::size_t count) {
  const auto d = distinct_sorted(std::move(coordinates));
  if (d.size() < 2) throw InsufficientDataError("bandwidth search needs at least 2 distinct coordinates");
  std::vector<double> gaps(d.size() - 1);
  for (std::size_t a = 0; a + 1 < d.size(); ++a) gaps[a] = d[a + 1] - d[a];
  const double max_gap = *std::max_element(gaps.begin(), gaps.end());
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
  const double median_gap = gaps[gaps.size() / 2];
  const double range = d.back() - d.front();
  const double lo = std::max(2.0 * median_gap, 1.01 * max_gap);
  const double hi = std::max(0.5 * range, 2.0 * lo);
  std::vector<double> out(count);
  for (std::size_t a = 0; a < count; ++a) {
    const double frac = count > 1 ? static_cast<double>(a) / static_cast<double>(count - 1) : 0.0;
    out[a] = lo * std::pow(hi / lo, frac);
  }
  return out;
}

double fallback_bandwidth(std::vector<double> coordinates) {
  const auto d = distinct_sorted(std::move(coordinates));
  if (d.size() < 2) throw InsufficientDataError("bandwidth fallback needs at least 2 distinct coordinates");
  std::vector<double> gaps(d.size() - 1);
  for (std::size_t a = 0; a + 1 < d.size(); ++a) gaps[a] = d[a + 1] - d[a];
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
  return 1.5 * gaps[gaps.size() / 2];
}

// ---------------------------------------------------------------------------
// 1-D

LocalLinear1D::LocalLinear1D(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("local linear: x/y size mismatch");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  for (std::size_t n = 0; n < order.size();) {
    const double key = x[order[n]];
    double sum = 0.0, sum_sq = 0.0;
    std::size_t c = 0;
    for (; n < order.size() && x[order[n]] == key; ++n, ++c) {
      sum += y[order[n]];
      sum_sq += y[order[n]] * y[order[n]];
    }
    const double mean = sum / static_cast<double>(c);
    xs_.push_back(key);
    counts_.push_back(static_cast<double>(c));
    means_.push_back(mean);
    within_ss_ += std::max(0.0, sum_sq - static_cast<double>(c) * mean * mean);
  }
  total_ = x.size();
}

LocalLinear1D::Local LocalLinear1D::fit_local(double x0, double bandwidth, std::ptrdiff_t self) const {
  if (xs_.empty()) throw InsufficientDataError("local linear fit without data");
  double h = bandwidth;
  const double span = xs_.back() - xs_.front();
  for (int attempt = 0; attempt < kMaxWidening; ++attempt, h *= kWidenFactor) {
    const auto lo = std::lower_bound(xs_.begin(), xs_.end(), x0 - h) - xs_.begin();
    const auto hi = std::upper_bound(xs_.begin(), xs_.end(), x0 + h) - xs_.begin();
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (auto g = lo; g < hi; ++g) {
      const double dx = xs_[static_cast<std::size_t>(g)] - x0;
      const double w = counts_[static_cast<std::size_t>(g)] * epanechnikov(dx / h);
      s0 += w;
      s1 += w * dx;
      s2 += w * dx * dx;
      t0 += w * means_[static_cast<std::size_t>(g)];
      t1 += w * dx * means_[static_cast<std::size_t>(g)];
    }
    const double det = s0 * s2 - s1 * s1;
    if (s0 > 0.0 && det > 1e-10 * s0 * s2 && det > 0.0) {
      const double value = (s2 * t0 - s1 * t1) / det;
      double self_weight = 0.0;
      if (self >= 0) {
        const auto g = static_cast<std::size_t>(self);
        const double dx = xs_[g] - x0;
        const double w = counts_[g] * epanechnikov(dx / h);
        self_weight = w * (s2 - s1 * dx) / det;
      }
      return {value, self_weight};
    }
    if (h > 4.0 * span + 1.0) break;
  }
  // Degenerate design (a single distinct abscissa): pooled mean.
  double num = 0.0, den = 0.0;
  for (std::size_t g = 0; g < xs_.size(); ++g) {
    num += counts_[g] * means_[g];
    den += counts_[g];
  }
  return {num / den, self >= 0 ? counts_[static_cast<std::size_t>(self)] / den : 0.0};
}

double LocalLinear1D::fit(double x0, double bandwidth) const { return fit_local(x0, bandwidth, -1).value; }

Eigen::VectorXd LocalLinear1D::evaluate(const Eigen::VectorXd& at, double bandwidth) const {
  Eigen::VectorXd out(at.size());
  for (Eigen::Index m = 0; m < at.size(); ++m) out[m] = fit(at[m], bandwidth);
  return out;
}

double LocalLinear1D::gcv(double bandwidth) const {
  double rss = within_ss_, trace = 0.0;
  for (std::size_t g = 0; g < xs_.size(); ++g) {
    const auto local = fit_local(xs_[g], bandwidth, static_cast<std::ptrdiff_t>(g));
    const double r = means_[g] - local.value;
    rss += counts_[g] * r * r;
    trace += local.self_weight;
  }
  return gcv_score(rss, trace, static_cast<double>(total_));
}

BandwidthChoice LocalLinear1D::select_bandwidth() const {
  BandwidthChoice choice;
  choice.candidates = bandwidth_candidates(xs_);
  double best = std::numeric_limits<double>::infinity();
  for (double h : choice.candidates) {
    const double s = gcv(h);
    choice.scores.push_back(s);
    if (std::isfinite(s) && s < best) {
      best = s;
      choice.bandwidth = h;
      choice.from_gcv = true;
    }
  }
  if (!choice.from_gcv) choice.bandwidth = fallback_bandwidth(xs_);
  return choice;
}

// ---------------------------------------------------------------------------
// 2-D

LocalLinear2D::LocalLinear2D(std::span<const double> x, std::span<const double> y, std::span<const double> z) {
  if (x.size() != y.size() || x.size() != z.size()) throw DimensionError("local linear 2-D: size mismatch");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  for (std::size_t n = 0; n < order.size();) {
    const double kx = x[order[n]], ky = y[order[n]];
    double sum = 0.0, sum_sq = 0.0;
    std::size_t c = 0;
    for (; n < order.size() && x[order[n]] == kx && y[order[n]] == ky; ++n, ++c) {
      sum += z[order[n]];
      sum_sq += z[order[n]] * z[order[n]];
    }
    const double mean = sum / static_cast<double>(c);
    xs_.push_back(kx);
    ys_.push_back(ky);
    counts_.push_back(static_cast<double>(c));
    means_.push_back(mean);
    within_ss_ += std::max(0.0, sum_sq - static_cast<double>(c) * mean * mean);
  }
  total_ = x.size();
}

LocalLinear2D::Local LocalLinear2D::fit_local(double x0, double y0, double bandwidth, std::ptrdiff_t self) const {
  if (xs_.empty()) throw InsufficientDataError("local linear surface fit without data");
  double h = bandwidth;
  for (int attempt = 0; attempt < kMaxWidening; ++attempt, h *= kWidenFactor) {
    const auto lo = std::lower_bound(xs_.begin(), xs_.end(), x0 - h) - xs_.begin();
    const auto hi = std::upper_bound(xs_.begin(), xs_.end(), x0 + h) - xs_.begin();
    Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
    Eigen::Vector3d T = Eigen::Vector3d::Zero();
    for (auto gi = lo; gi < hi; ++gi) {
      const auto g = static_cast<std::size_t>(gi);
      const double dy = ys_[g] - y0;
      if (std::abs(dy) >= h) continue;
      const double dx = xs_[g] - x0;
      const double w = counts_[g] * epanechnikov(dx / h) * epanechnikov(dy / h);
      if (w == 0.0) continue;
      const Eigen::Vector3d row(1.0, dx, dy);
      S.noalias() += w * row * row.transpose();
      T.noalias() += w * means_[g] * row;
    }
    const double scale = S(0, 0) * S(1, 1) * S(2, 2);
    const double det = S.determinant();
    if (S(0, 0) > 0.0 && scale > 0.0 && det > 1e-10 * scale) {
      const Eigen::Matrix3d inv = S.inverse();
      const double value = (inv.row(0) * T)(0);
      double self_weight = 0.0;
      if (self >= 0) {
        const auto g = static_cast<std::size_t>(self);
        const double dx = xs_[g] - x0, dy = ys_[g] - y0;
        const double w = counts_[g] * epanechnikov(dx / h) * epanechnikov(dy / h);
        self_weight = w * (inv(0, 0) + inv(0, 1) * dx + inv(0, 2) * dy);
      }
      return {value, self_weight};
    }
    if (h > 10.0) break;
  }
  double num = 0.0, den = 0.0;
  for (std::size_t g = 0; g < xs_.size(); ++g) {
    num += counts_[g] * means_[g];
    den += counts_[g];
  }
  return {num / den, self >= 0 ? counts_[static_cast<std::size_t>(self)] / den : 0.0};
}

double LocalLinear2D::fit(double x0, double y0, double bandwidth) const {
  return fit_local(x0, y0, bandwidth, -1).value;
}

double LocalLinear2D::diagonal(double t0, double bandwidth) const {
  if (xs_.empty()) throw InsufficientDataError("local linear surface fit without data");
  const double r = std::sqrt(0.5);
  double h = bandwidth;
  for (int attempt = 0; attempt < kMaxWidening; ++attempt, h *= kWidenFactor) {
    const double reach = 2.0 * r * h;
    const auto lo = std::lower_bound(xs_.begin(), xs_.end(), t0 - reach) - xs_.begin();
    const auto hi = std::upper_bound(xs_.begin(), xs_.end(), t0 + reach) - xs_.begin();
    Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
    Eigen::Vector3d T = Eigen::Vector3d::Zero();
    for (auto gi = lo; gi < hi; ++gi) {
      const auto g = static_cast<std::size_t>(gi);
      const double dx = xs_[g] - t0, dy = ys_[g] - t0;
      const double along = r * (dx + dy), across = r * (dx - dy);
      const double w = counts_[g] * epanechnikov(along / h) * epanechnikov(across / h);
      if (w == 0.0) continue;
      const Eigen::Vector3d row(1.0, along, across * across);
      S.noalias() += w * row * row.transpose();
      T.noalias() += w * means_[g] * row;
    }
    const double scale = S(0, 0) * S(1, 1) * S(2, 2);
    if (S(0, 0) > 0.0 && scale > 0.0 && S.determinant() > 1e-10 * scale) return S.ldlt().solve(T)(0);
    if (h > 10.0) break;
  }
  return fit(t0, t0, bandwidth);
}

Eigen::MatrixXd LocalLinear2D::evaluate(const Eigen::VectorXd& rows, const Eigen::VectorXd& cols,
                                        double bandwidth) const {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (Eigen::Index a = 0; a < rows.size(); ++a)
    for (Eigen::Index b = 0; b < cols.size(); ++b) out(a, b) = fit(rows[a], cols[b], bandwidth);
  return out;
}

double LocalLinear2D::gcv(double bandwidth) const {
  double rss = within_ss_, trace = 0.0;
  for (std::size_t g = 0; g < xs_.size(); ++g) {
    const auto local = fit_local(xs_[g], ys_[g], bandwidth, static_cast<std::ptrdiff_t>(g));
    const double r = means_[g] - local.value;
    rss += counts_[g] * r * r;
    trace += local.self_weight;
  }
  return gcv_score(rss, trace, static_cast<double>(total_));
}

BandwidthChoice LocalLinear2D::select_bandwidth() const {
  std::vector<double> coords(xs_);
  coords.insert(coords.end(), ys_.begin(), ys_.end());
  BandwidthChoice choice;
  choice.candidates = bandwidth_candidates(coords);
  double best = std::numeric_limits<double>::infinity();
  for (double h : choice.candidates) {
    const double s = gcv(h);
    choice.scores.push_back(s);
    if (std::isfinite(s) && s < best) {
      best = s;
      choice.bandwidth = h;
      choice.from_gcv = true;
    }
  }
  if (!choice.from_gcv) choice.bandwidth = fallback_bandwidth(coords);
  return choice;
}

}  // namespace smpca
