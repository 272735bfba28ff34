#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "smpca/filters.hpp"
#include "smpca/grid.hpp"
#include "smpca/observations.hpp"
#include "smpca/smoothing.hpp"

namespace smpca {

/// Flattening of xi_{ijk}: k-major, then j, then i. Curve index j is zero-based and
/// runs over [-L_k, J - 1 + L_k], so T_k = J + 2 L_k entries per subject and component.
class ScoreLayout {
 public:
  ScoreLayout() = default;
  ScoreLayout(std::size_t p, std::size_t J, std::vector<std::size_t> L);

  std::size_t subjects() const { return p_; }
  std::size_t curves() const { return J_; }
  std::size_t K() const { return L_.size(); }
  std::size_t L(std::size_t k) const { return L_.at(k); }
  const std::vector<std::size_t>& L_list() const { return L_; }
  std::size_t T(std::size_t k) const { return J_ + 2 * L_.at(k); }
  std::size_t offset(std::size_t k) const { return offsets_.at(k); }
  std::size_t size() const { return size_; }

  /// Column of xi_{i, j, k}; `r` = j + L_k is the position within the series.
  std::size_t column_at(std::size_t i, std::size_t r, std::size_t k) const { return offsets_[k] + r * p_ + i; }
  std::size_t column(std::size_t i, long j, std::size_t k) const;

  bool operator==(const ScoreLayout& other) const = default;

 private:
  std::size_t p_ = 0, J_ = 0, size_ = 0;
  std::vector<std::size_t> L_, offsets_;
};

/// Real scores xi_{ijk} stored flat in the layout order.
struct ScoreArray {
  ScoreLayout layout;
  Eigen::VectorXd values;

  ScoreArray() = default;
  ScoreArray(ScoreLayout l, Eigen::VectorXd v);

  double at(std::size_t i, long j, std::size_t k) const { return values[static_cast<Eigen::Index>(layout.column(i, j, k))]; }
  /// p x T_k matrix, column r holds the scores at curve index r - L_k.
  Eigen::MatrixXd series(std::size_t k) const;
};

/// Sparse design A, demeaned responses y and per-row weights sigma_i^{-2}.
struct DesignSystem {
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  Eigen::VectorXd y;
  Eigen::VectorXd weights;
  struct Row {
    std::size_t subject, curve, index;
  };
  std::vector<Row> rows;  // ordered by subject, curve, observation
};

/// Rows are observations (i, j, z); row (i, j, z) carries phi_kl(t_ijz) in column (i, j + l, k).
/// `means` may be empty (zero means), `noise` may be empty (unit weights).
DesignSystem build_design(const ObservationSet& obs, const FilterBank& bank, const ScoreLayout& layout,
                          const MeanFunctions& means = {}, const std::vector<double>& noise = {});

/// Whittle prior precision Q = diag(Q_1..Q_K), Q_k = (F_k kron I_p)^* D_k (F_k kron I_p).
class WhittlePrecision {
 public:
  WhittlePrecision() = default;
  /// eta[i] is K x J (column j-1 at omega_j = 2 pi j / J). Values are floored at 1e-8 x max.
  WhittlePrecision(const std::vector<Eigen::MatrixXd>& eta, const ScoreLayout& layout);

  const ScoreLayout& layout() const { return layout_; }
  /// Floored eta~_{ik}(omega_j).
  double eta(std::size_t i, std::size_t k, std::size_t j) const { return eta_[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }

  /// Complex Hermitian Q (dense; for tests and small instances).
  Eigen::MatrixXcd dense() const;
  /// Re(Q) (dense).
  Eigen::MatrixXd real_dense() const;
  /// Re(Q) x, applied block by block through the Toeplitz coefficients.
  Eigen::VectorXd apply_real(const Eigen::VectorXd& x) const;
  /// x^* Q x for complex x.
  cdouble quadratic_form(const Eigen::VectorXcd& x) const;
  /// Adds Re(Q) to a triplet list.
  void append_real(std::vector<Eigen::Triplet<double>>& triplets) const;

 private:
  ScoreLayout layout_;
  std::vector<Eigen::MatrixXd> eta_;       // per k: p x J
  std::vector<Eigen::MatrixXd> toeplitz_;  // per k: p x T_k, q_{ik}(d) = (1/2pi T) sum_j cos(d omega_j) / eta
};

struct SolverOptions {
  double tolerance = 1e-8;
  /// 0 means 10 x d_xi.
  std::size_t max_iterations = 0;
};

struct MapResult {
  Eigen::VectorXd xi;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool ridge = false;
  std::vector<std::string> warnings;
};

/// Solves (A^T W A + Re Q) xi = A^T W y by incomplete-Cholesky preconditioned conjugate gradients.
MapResult map_scores(const DesignSystem& design, const WhittlePrecision& Q, const SolverOptions& options = {});

/// 1/2 ||W^{1/2}(y - A xi)||^2 + 1/2 xi^T Re(Q) xi.
double posterior_objective(const DesignSystem& design, const WhittlePrecision& Q, const Eigen::VectorXd& xi);
/// Gradient of the log posterior, A^T W (y - A xi) - Re(Q) xi.
Eigen::VectorXd posterior_gradient(const DesignSystem& design, const WhittlePrecision& Q, const Eigen::VectorXd& xi);
/// The same gradient assembled subject by subject from per-curve filter matrices and
/// the Fourier vectors rho_k(omega_j), independent of the design matrix.
Eigen::VectorXd posterior_gradient_blockwise(const ObservationSet& obs, const FilterBank& bank,
                                             const ScoreLayout& layout, const MeanFunctions& means,
                                             const std::vector<double>& noise, const WhittlePrecision& Q,
                                             const Eigen::VectorXd& xi);

}  // namespace smpca
