#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "smpca/grid.hpp"
#include "smpca/smoothing.hpp"

namespace smpca {

/// Kernel matrices f(t,s|omega) on a TimeGrid, one per FrequencyGrid node.
class SpectralField {
 public:
  /// Marker for the cross-subject average.
  static constexpr long kMarginal = -1;

  SpectralField() = default;
  SpectralField(std::vector<Eigen::MatrixXcd> kernels, long scope);

  std::size_t size() const { return kernels_.size(); }
  std::size_t time_points() const { return kernels_.empty() ? 0 : static_cast<std::size_t>(kernels_[0].rows()); }
  const Eigen::MatrixXcd& at(std::size_t a) const { return kernels_.at(a); }
  const std::vector<Eigen::MatrixXcd>& kernels() const { return kernels_; }
  /// Subject index, or kMarginal.
  long scope() const { return scope_; }

  /// Largest |entry| over all nodes.
  double scale() const;
  /// Largest Hermitian defect over all nodes.
  double hermitian_defect() const;
  /// Largest |f(.|-omega) - conj f(.|omega)| over all nodes.
  double reflection_defect(const FrequencyGrid& fgrid) const;

 private:
  std::vector<Eigen::MatrixXcd> kernels_;
  long scope_ = kMarginal;
};

/// floor((J * mean_count)^(1/4)) clamped to [1, J - 1] (1 when J < 2).
std::size_t select_h_max(std::size_t J, double mean_count);

/// Bartlett lag-window estimate (1/2pi) sum_{|h|<h_max} (1 - |h|/h_max) C_h e^{i h omega}.
SpectralField bartlett_spectral(const AutocovField& autocov, std::size_t subject, std::size_t h_max,
                                const FrequencyGrid& fgrid);

/// Elementwise average of per-subject fields.
SpectralField marginal_spectral(const std::vector<SpectralField>& fields);

/// Inverse transform int f(.|omega) e^{-i h omega} d omega by frequency quadrature.
Eigen::MatrixXcd inverse_fourier(const SpectralField& field, const FrequencyGrid& fgrid, long h);

/// Leading eigenpairs at every frequency node.
///
/// Eigenfunctions follow the convention f(t,s|omega) = sum_k eta_k conj(psi_k(t)) psi_k(s)
/// and have unit quadrature norm. Columns of functions[k] are nodes of the FrequencyGrid.
struct EigenSystem {
  Eigen::MatrixXd eigenvalues;               // K_max x n_freq, descending in k, clipped at 0
  std::vector<Eigen::MatrixXcd> functions;   // per k: M_t x n_freq
  double min_eigenvalue = 0.0;               // smallest eigenvalue before clipping (any node)
  double max_eigenvalue = 0.0;               // largest eigenvalue (any node)

  std::size_t components() const { return functions.size(); }
  Eigen::VectorXcd function(std::size_t k, std::size_t a) const { return functions.at(k).col(static_cast<Eigen::Index>(a)); }
};

/// Hermitian eigendecomposition of D^{1/2} F D^{1/2} on omega >= 0, mirrored to omega < 0.
/// Eigenfunction phases are only chained so that adjacent nonnegative nodes have a real,
/// nonnegative overlap; any remaining indeterminacy is left to the phase optimizer.
EigenSystem eigendecompose_per_frequency(const SpectralField& field, const TimeGrid& tgrid,
                                         const FrequencyGrid& fgrid, std::size_t K_max, std::size_t threads = 1);

/// Integral of each eigenvalue curve over [-pi, pi].
std::vector<double> integrated_eigenvalues(const EigenSystem& eigsys, const FrequencyGrid& fgrid);
/// argmax_k I_k / I_{k+1}, k = 1..K_max-1 (1-based result); ties go to the smaller k.
std::size_t select_K(const std::vector<double>& integrated);
std::size_t select_K(const EigenSystem& eigsys, const FrequencyGrid& fgrid, std::size_t K_max);

/// eta~_{ik}(omega) = int int psi_k(t) f_ii(t,s) conj(psi_k(s)) dt ds for a single node.
double score_spectral_value(const Eigen::VectorXcd& psi, const Eigen::MatrixXcd& kernel, const TimeGrid& tgrid);

/// Score spectral densities on the Whittle set: per subject a K x J matrix, column j-1 at 2 pi j / J.
/// Values are clipped below at 1e-8 times the overall maximum.
std::vector<Eigen::MatrixXd> score_spectral_density(const EigenSystem& eigsys, std::size_t K,
                                                    const std::vector<SpectralField>& subject_fields,
                                                    const TimeGrid& tgrid, const FrequencyGrid& fgrid);

}  // namespace smpca
