#include "smpca/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "smpca/error.hpp"
#include "smpca/parallel.hpp"

namespace smpca {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

SpectralField::SpectralField(std::vector<Eigen::MatrixXcd> kernels, long scope)
    : kernels_(std::move(kernels)), scope_(scope) {
  for (const auto& k : kernels_)
    if (k.rows() != k.cols() || k.rows() != kernels_.front().rows())
      throw DimensionError("spectral field kernels must be square and of equal size");
}

double SpectralField::scale() const {
  double s = 0.0;
  for (const auto& k : kernels_) s = std::max(s, k.cwiseAbs().maxCoeff());
  return s;
}

double SpectralField::hermitian_defect() const {
  double d = 0.0;
  for (const auto& k : kernels_) d = std::max(d, smpca::hermitian_defect(k));
  return d;
}

double SpectralField::reflection_defect(const FrequencyGrid& fgrid) const {
  if (fgrid.size() != kernels_.size()) throw DimensionError("spectral field / frequency grid mismatch");
  double d = 0.0;
  for (std::size_t a = 0; a < kernels_.size(); ++a)
    d = std::max(d, (kernels_[fgrid.mirror(a)] - kernels_[a].conjugate()).cwiseAbs().maxCoeff());
  return d;
}

std::size_t select_h_max(std::size_t J, double mean_count) {
  if (J < 2 || !(mean_count > 0.0)) return 1;
  const auto raw = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(J) * mean_count, 0.25)));
  return std::clamp<std::size_t>(raw, 1, J - 1);
}

SpectralField bartlett_spectral(const AutocovField& autocov, std::size_t subject, std::size_t h_max,
                                const FrequencyGrid& fgrid) {
  if (h_max < 1) throw ArgumentError("h_max must be at least 1");
  if (!autocov.has_lag(static_cast<long>(h_max) - 1))
    throw ArgumentError("Bartlett estimate needs autocovariances up to lag " + std::to_string(h_max - 1));

  const Eigen::MatrixXd& c0 = autocov.nonnegative_lag(subject, 0);
  // Symmetric and antisymmetric parts of every weighted lag.
  std::vector<Eigen::MatrixXd> sym, anti;
  for (std::size_t h = 1; h < h_max; ++h) {
    const double w = 1.0 - static_cast<double>(h) / static_cast<double>(h_max);
    const Eigen::MatrixXd& ch = autocov.nonnegative_lag(subject, h);
    sym.push_back(w * (ch + ch.transpose()));
    anti.push_back(w * (ch - ch.transpose()));
  }

  std::vector<Eigen::MatrixXcd> kernels(fgrid.size());
  for (std::size_t a = 0; a < fgrid.size(); ++a) {
    const double omega = fgrid[a];
    Eigen::MatrixXd re = c0, im = Eigen::MatrixXd::Zero(c0.rows(), c0.cols());
    for (std::size_t h = 1; h < h_max; ++h) {
      re += std::cos(static_cast<double>(h) * omega) * sym[h - 1];
      im += std::sin(static_cast<double>(h) * omega) * anti[h - 1];
    }
    kernels[a].resize(c0.rows(), c0.cols());
    kernels[a].real() = re / kTwoPi;
    kernels[a].imag() = im / kTwoPi;
  }
  return SpectralField(std::move(kernels), static_cast<long>(subject));
}

SpectralField marginal_spectral(const std::vector<SpectralField>& fields) {
  if (fields.empty()) throw ArgumentError("marginal spectral density needs at least one subject");
  const std::size_t n = fields.front().size();
  for (const auto& f : fields)
    if (f.size() != n || f.time_points() != fields.front().time_points())
      throw DimensionError("subject spectral fields live on different grids");
  std::vector<Eigen::MatrixXcd> kernels(n);
  const double inv = 1.0 / static_cast<double>(fields.size());
  for (std::size_t a = 0; a < n; ++a) {
    kernels[a] = fields.front().at(a);
    for (std::size_t i = 1; i < fields.size(); ++i) kernels[a] += fields[i].at(a);
    kernels[a] *= inv;
  }
  return SpectralField(std::move(kernels), SpectralField::kMarginal);
}

Eigen::MatrixXcd inverse_fourier(const SpectralField& field, const FrequencyGrid& fgrid, long h) {
  if (field.size() != fgrid.size()) throw DimensionError("spectral field / frequency grid mismatch");
  const auto n = static_cast<Eigen::Index>(field.time_points());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t a = 0; a < fgrid.size(); ++a) {
    const double w = fgrid.weights()[static_cast<Eigen::Index>(a)];
    if (w == 0.0) continue;
    out += (w * std::polar(1.0, -static_cast<double>(h) * fgrid[a])) * field.at(a);
  }
  return out;
}

EigenSystem eigendecompose_per_frequency(const SpectralField& field, const TimeGrid& tgrid,
                                         const FrequencyGrid& fgrid, std::size_t K_max, std::size_t threads) {
  if (field.size() != fgrid.size()) throw DimensionError("spectral field / frequency grid mismatch");
  const auto Mt = static_cast<Eigen::Index>(tgrid.size());
  if (static_cast<Eigen::Index>(field.time_points()) != Mt) throw DimensionError("spectral field / time grid mismatch");
  if (K_max < 1) throw ArgumentError("K_max must be at least 1");
  K_max = std::min<std::size_t>(K_max, static_cast<std::size_t>(Mt));

  const double scale = std::max(field.scale(), 1e-300);
  const double defect = field.hermitian_defect();
  if (defect > 1e-10 * scale)
    throw InvariantError("spectral kernel is not Hermitian (defect " + std::to_string(defect) + ")");

  const Eigen::ArrayXd sqrt_w = tgrid.weights().array().sqrt();
  const Eigen::ArrayXd inv_sqrt_w = sqrt_w.inverse();
  const std::size_t nf = fgrid.size();
  const auto& half = fgrid.nonnegative();

  EigenSystem out;
  out.eigenvalues = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K_max), static_cast<Eigen::Index>(nf));
  out.functions.assign(K_max, Eigen::MatrixXcd::Zero(Mt, static_cast<Eigen::Index>(nf)));
  std::vector<double> node_min(half.size(), 0.0), node_max(half.size(), 0.0);

  parallel_for(half.size(), threads, [&](std::size_t n) {
    const std::size_t a = half[n];
    Eigen::MatrixXcd weighted = sqrt_w.matrix().asDiagonal() * field.at(a) * sqrt_w.matrix().asDiagonal();
    weighted = (0.5 * (weighted + weighted.adjoint())).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(weighted);
    if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed at node " + std::to_string(a));
    const Eigen::VectorXd& vals = solver.eigenvalues();  // ascending
    node_min[n] = vals[0];
    node_max[n] = vals[Mt - 1];
    for (std::size_t k = 0; k < K_max; ++k) {
      const Eigen::Index src = Mt - 1 - static_cast<Eigen::Index>(k);
      out.eigenvalues(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) = std::max(0.0, vals[src]);
      // Standard eigenvector v gives f = sum eta v(t) conj(v(s)); the stored function is conj(v).
      Eigen::VectorXcd psi = (inv_sqrt_w * solver.eigenvectors().col(src).array()).conjugate().matrix();
      if (a == fgrid.zero_index()) {
        // f(.|0) is real symmetric: rotate onto the real line.
        Eigen::Index big = 0;
        psi.cwiseAbs().maxCoeff(&big);
        psi *= std::conj(psi[big]) / std::abs(psi[big]);
        psi = psi.real().cast<cdouble>();
        psi /= std::sqrt(squared_norm(psi, tgrid));
      }
      out.functions[k].col(static_cast<Eigen::Index>(a)) = psi;
    }
  });
  out.min_eigenvalue = *std::min_element(node_min.begin(), node_min.end());
  out.max_eigenvalue = *std::max_element(node_max.begin(), node_max.end());

  for (std::size_t k = 0; k < K_max; ++k) {
    auto& fk = out.functions[k];
    for (std::size_t n = 1; n < half.size(); ++n) {
      const auto prev = static_cast<Eigen::Index>(half[n - 1]);
      const auto cur = static_cast<Eigen::Index>(half[n]);
      const cdouble overlap = trapezoid_inner_product(Eigen::VectorXcd(fk.col(prev)), Eigen::VectorXcd(fk.col(cur)), tgrid);
      if (std::abs(overlap) > 1e-12) fk.col(cur) *= std::conj(overlap) / std::abs(overlap);
    }
    for (std::size_t a = 0; a < nf; ++a) {
      const std::size_t m = fgrid.mirror(a);
      if (fgrid[a] < 0.0) {
        fk.col(static_cast<Eigen::Index>(a)) = fk.col(static_cast<Eigen::Index>(m)).conjugate();
        out.eigenvalues.col(static_cast<Eigen::Index>(a)) = out.eigenvalues.col(static_cast<Eigen::Index>(m));
      }
    }
  }
  return out;
}

std::vector<double> integrated_eigenvalues(const EigenSystem& eigsys, const FrequencyGrid& fgrid) {
  if (static_cast<std::size_t>(eigsys.eigenvalues.cols()) != fgrid.size())
    throw DimensionError("eigen system / frequency grid mismatch");
  const Eigen::VectorXd totals = eigsys.eigenvalues * fgrid.weights();
  return {totals.data(), totals.data() + totals.size()};
}

std::size_t select_K(const std::vector<double>& integrated) {
  if (integrated.size() < 2) throw ArgumentError("select_K needs K_max >= 2");
  if (*std::max_element(integrated.begin(), integrated.end()) < 1e-12)
    throw NumericError("degenerate spectrum: every integrated eigenvalue is below 1e-12");
  const double tiny = 1e-12 * integrated.front();
  std::size_t best = 1;
  double best_ratio = -1.0;
  for (std::size_t k = 0; k + 1 < integrated.size(); ++k) {
    const double next = integrated[k + 1];
    const double ratio = next <= tiny ? std::numeric_limits<double>::infinity() : integrated[k] / next;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = k + 1;
    }
  }
  return best;
}

std::size_t select_K(const EigenSystem& eigsys, const FrequencyGrid& fgrid, std::size_t K_max) {
  auto totals = integrated_eigenvalues(eigsys, fgrid);
  if (K_max < totals.size()) totals.resize(K_max);
  return select_K(totals);
}

double score_spectral_value(const Eigen::VectorXcd& psi, const Eigen::MatrixXcd& kernel, const TimeGrid& tgrid) {
  const Eigen::VectorXcd weighted = tgrid.weights().cast<cdouble>().cwiseProduct(psi);
  // psi^T diag(w) K diag(w) conj(psi)
  const cdouble value = weighted.transpose() * kernel * weighted.conjugate();
  const double scale = std::max(1.0, std::abs(value));
  if (std::abs(value.imag()) > 1e-10 * scale * std::max(1.0, kernel.cwiseAbs().maxCoeff()))
    throw InvariantError("score spectral density has a non-negligible imaginary part");
  return value.real();
}

std::vector<Eigen::MatrixXd> score_spectral_density(const EigenSystem& eigsys, std::size_t K,
                                                    const std::vector<SpectralField>& subject_fields,
                                                    const TimeGrid& tgrid, const FrequencyGrid& fgrid) {
  if (K < 1 || K > eigsys.components()) throw ArgumentError("K outside the computed eigen system");
  const std::size_t J = fgrid.whittle_length();
  if (J == 0) throw ArgumentError("frequency grid carries no Whittle set");
  std::vector<Eigen::MatrixXd> out;
  double peak = 0.0;
  for (const auto& field : subject_fields) {
    if (field.size() != fgrid.size()) throw DimensionError("subject field / frequency grid mismatch");
    Eigen::MatrixXd eta(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(J));
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < J; ++j) {
        const std::size_t a = fgrid.whittle()[j];
        eta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
            score_spectral_value(eigsys.function(k, a), field.at(a), tgrid);
      }
    peak = std::max(peak, eta.maxCoeff());
    out.push_back(std::move(eta));
  }
  const double floor = 1e-8 * peak;
  for (auto& eta : out) eta = eta.cwiseMax(floor);
  return out;
}

}  // namespace smpca
