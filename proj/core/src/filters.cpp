#include "smpca/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "smpca/error.hpp"
#include "smpca/parallel.hpp"

namespace smpca {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Projection onto the feasible set: unit modulus, real at omega = 0, mirrored by conjugation.
void project(Eigen::VectorXcd& nu, const Eigen::VectorXcd& target, const FrequencyGrid& fgrid) {
  for (std::size_t a : fgrid.nonnegative()) {
    const auto ai = static_cast<Eigen::Index>(a);
    const cdouble v = target[ai];
    if (a == fgrid.zero_index()) {
      if (v.real() != 0.0) nu[ai] = v.real() > 0.0 ? 1.0 : -1.0;
    } else if (std::abs(v) > 1e-300) {
      nu[ai] = v / std::abs(v);
    }
    nu[static_cast<Eigen::Index>(fgrid.mirror(a))] = std::conj(nu[ai]);
  }
}

}  // namespace

Eigen::MatrixXcd overlap_kernel(const Eigen::MatrixXcd& functions, const TimeGrid& tgrid) {
  if (static_cast<std::size_t>(functions.rows()) != tgrid.size()) throw DimensionError("overlap kernel: grid mismatch");
  const Eigen::MatrixXcd gram = functions.adjoint() * tgrid.weights().cast<cdouble>().asDiagonal() * functions;
  return 0.5 * (gram + gram.adjoint());
}

Eigen::MatrixXcd overlap_kernel(const EigenSystem& eigsys, std::size_t k, const TimeGrid& tgrid) {
  return overlap_kernel(eigsys.functions.at(k), tgrid);
}

double phase_objective(const Eigen::MatrixXcd& overlap, const Eigen::VectorXcd& nu, const FrequencyGrid& fgrid) {
  const Eigen::VectorXcd wn = fgrid.weights().cast<cdouble>().cwiseProduct(nu);
  const cdouble value = wn.dot(overlap * wn);  // conj(wn)^T Psi wn
  return value.real() / (kTwoPi * kTwoPi);
}

PhaseMultiplier optimize_phase(const Eigen::MatrixXcd& overlap, const FrequencyGrid& fgrid,
                               const PhaseOptions& options) {
  const auto n = static_cast<Eigen::Index>(fgrid.size());
  if (overlap.rows() != n || overlap.cols() != n) throw DimensionError("overlap kernel / frequency grid mismatch");

  PhaseMultiplier out;
  Eigen::VectorXcd nu = Eigen::VectorXcd::Ones(n);
  const auto& half = fgrid.nonnegative();
  for (std::size_t m = 1; m < half.size(); ++m) {
    const auto prev = static_cast<Eigen::Index>(half[m - 1]);
    const auto cur = static_cast<Eigen::Index>(half[m]);
    const cdouble link = overlap(prev, cur);
    nu[cur] = std::abs(link) > 1e-300 ? nu[prev] * std::conj(link) / std::abs(link) : nu[prev];
  }
  project(nu, nu, fgrid);

  const Eigen::VectorXcd w = fgrid.weights().cast<cdouble>();
  const double wsum = fgrid.weights().sum();
  double objective = phase_objective(overlap, nu, fgrid);
  if (!std::isfinite(objective)) throw NumericError("phase objective is not finite");
  out.initial_objective = objective;
  out.trace.push_back(objective);

  double step = 1.0;
  Eigen::VectorXcd candidate = nu;
  while (out.iterations < options.max_iterations) {
    ++out.iterations;
    const Eigen::VectorXcd gradient = overlap * w.cwiseProduct(nu) / wsum;
    candidate = nu;
    project(candidate, nu + step * gradient, fgrid);
    const double value = phase_objective(overlap, candidate, fgrid);
    if (!std::isfinite(value)) throw NumericError("phase objective is not finite");
    if (value < objective) {
      step *= 0.5;
      if (step < 1e-10) break;
      continue;
    }
    const double change = (value - objective) / std::max(std::abs(objective), 1e-300);
    nu = candidate;
    objective = value;
    out.trace.push_back(objective);
    if (change < options.tolerance) break;
  }

  // Nodes without quadrature weight do not enter the objective; align them with the optimum.
  const Eigen::VectorXcd gradient = overlap * w.cwiseProduct(nu);
  Eigen::VectorXcd target = nu;
  for (std::size_t a : half)
    if (fgrid.weights()[static_cast<Eigen::Index>(a)] == 0.0) target[static_cast<Eigen::Index>(a)] = gradient[static_cast<Eigen::Index>(a)];
  project(nu, target, fgrid);

  out.values = std::move(nu);
  out.objective = objective;
  return out;
}

Eigen::MatrixXd build_filters(const Eigen::MatrixXcd& functions, const Eigen::VectorXcd& nu,
                              const FrequencyGrid& fgrid, std::size_t L_max) {
  const auto nf = static_cast<Eigen::Index>(fgrid.size());
  if (functions.cols() != nf || nu.size() != nf) throw DimensionError("build_filters: frequency grid mismatch");
  const auto width = static_cast<Eigen::Index>(2 * L_max + 1);
  // Twiddle matrix E(a, l) = w_a nu_a e^{-i l omega_a} / 2pi.
  Eigen::MatrixXcd twiddle(nf, width);
  for (Eigen::Index a = 0; a < nf; ++a)
    for (Eigen::Index c = 0; c < width; ++c) {
      const double l = static_cast<double>(c) - static_cast<double>(L_max);
      twiddle(a, c) = fgrid.weights()[a] / kTwoPi * nu[a] * std::polar(1.0, -l * fgrid.points()[a]);
    }
  const Eigen::MatrixXcd phi = functions * twiddle;
  const double scale = phi.cwiseAbs().maxCoeff();
  const double residue = phi.imag().cwiseAbs().maxCoeff();
  if (residue > 1e-6 * std::max(scale, 1e-300))
    throw InvariantError("filters are not real: imaginary residue " + std::to_string(residue) + " vs scale " +
                         std::to_string(scale));
  return phi.real();
}

Eigen::MatrixXd build_filters(const EigenSystem& eigsys, const PhaseMultiplier& nu, std::size_t k,
                              const FrequencyGrid& fgrid, std::size_t L_max) {
  return build_filters(eigsys.functions.at(k), nu.values, fgrid, L_max);
}

std::size_t select_L_k(const std::vector<double>& squared_norms, double eps, std::size_t L_max) {
  if (squared_norms.size() != 2 * L_max + 1) throw DimensionError("select_L_k expects 2 L_max + 1 norms");
  double total = squared_norms[L_max];
  for (std::size_t L = 0;; ++L) {
    if (L > 0) total += squared_norms[L_max - L] + squared_norms[L_max + L];
    if (total >= 1.0 - eps) return L;
    if (L == L_max) return L_max;
  }
}

FilterBank::FilterBank(TimeGrid grid, std::vector<Eigen::MatrixXd> filters)
    : grid_(std::move(grid)), filters_(std::move(filters)) {
  for (const auto& f : filters_)
    if (static_cast<std::size_t>(f.rows()) != grid_.size() || f.cols() % 2 == 0)
      throw DimensionError("filter matrix must be M_t x (2L+1)");
}

std::vector<std::size_t> FilterBank::L_list() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < K(); ++k) out.push_back(L(k));
  return out;
}

Eigen::VectorXd FilterBank::filter(std::size_t k, long l) const {
  const auto L_k = static_cast<long>(L(k));
  if (std::labs(l) > L_k) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_.size()));
  return filters_[k].col(l + L_k);
}

double FilterBank::value(std::size_t k, long l, double t) const {
  const auto L_k = static_cast<long>(L(k));
  if (std::labs(l) > L_k) return 0.0;
  return grid_.interpolate(filters_[k].col(l + L_k), t);
}

double FilterBank::total_squared_norm(std::size_t k) const {
  double total = 0.0;
  for (Eigen::Index c = 0; c < filters_.at(k).cols(); ++c)
    total += squared_norm(Eigen::VectorXd(filters_[k].col(c)), grid_);
  return total;
}

FilterBank build_filter_bank(const EigenSystem& eigsys, std::size_t K, const TimeGrid& tgrid,
                             const FrequencyGrid& fgrid, const FilterOptions& options, std::size_t threads) {
  if (K < 1 || K > eigsys.components()) throw ArgumentError("K outside the computed eigen system");
  const std::size_t L_build = std::max(options.L_max, options.L_fixed.value_or(0));
  std::vector<Eigen::MatrixXd> full(K), kept(K);
  std::vector<PhaseMultiplier> phases(K);
  std::vector<std::vector<double>> norms(K);
  parallel_for(K, threads, [&](std::size_t k) {
    phases[k] = optimize_phase(overlap_kernel(eigsys, k, tgrid), fgrid, options.phase);
    full[k] = build_filters(eigsys, phases[k], k, fgrid, L_build);
    for (Eigen::Index c = 0; c < full[k].cols(); ++c)
      norms[k].push_back(squared_norm(Eigen::VectorXd(full[k].col(c)), tgrid));
    std::size_t L_k;
    if (options.L_fixed) {
      L_k = *options.L_fixed;
    } else {
      const std::vector<double> window(norms[k].begin() + static_cast<long>(L_build - options.L_max),
                                       norms[k].end() - static_cast<long>(L_build - options.L_max));
      L_k = select_L_k(window, options.eps, options.L_max);
    }
    kept[k] = full[k].middleCols(static_cast<Eigen::Index>(L_build - L_k), static_cast<Eigen::Index>(2 * L_k + 1));
  });
  FilterBank bank(tgrid, std::move(kept));
  for (std::size_t k = 0; k < K; ++k) {
    bank.phases.push_back(phases[k].values);
    bank.phase_objectives.push_back(phases[k].objective);
  }
  bank.lag_squared_norms = std::move(norms);
  return bank;
}

}  // namespace smpca
