#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "smpca/grid.hpp"
#include "smpca/spectral.hpp"

namespace smpca {

/// Psi_k(a, b) = int conj(psi_k(t|omega_a)) psi_k(t|omega_b) dt over all frequency nodes.
Eigen::MatrixXcd overlap_kernel(const EigenSystem& eigsys, std::size_t k, const TimeGrid& tgrid);
Eigen::MatrixXcd overlap_kernel(const Eigen::MatrixXcd& functions, const TimeGrid& tgrid);

/// (1/4pi^2) sum_a sum_b w_a w_b Psi(a,b) conj(nu_a) nu_b.
double phase_objective(const Eigen::MatrixXcd& overlap, const Eigen::VectorXcd& nu, const FrequencyGrid& fgrid);

struct PhaseOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 500;
};

/// Unit-modulus multiplier with nu(-omega) = conj nu(omega) and real nu(0).
struct PhaseMultiplier {
  Eigen::VectorXcd values;
  double initial_objective = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::vector<double> trace;  // objective after every accepted step
};

/// Greedy chain initialisation followed by projected gradient ascent with step halving.
PhaseMultiplier optimize_phase(const Eigen::MatrixXcd& overlap, const FrequencyGrid& fgrid,
                               const PhaseOptions& options = {});

/// phi_l(t) = (1/2pi) sum_a w_a psi(t|omega_a) nu(omega_a) e^{-i l omega_a}, |l| <= L_max.
/// Column l + L_max holds phi_l. Throws InvariantError if the imaginary part is not negligible.
Eigen::MatrixXd build_filters(const Eigen::MatrixXcd& functions, const Eigen::VectorXcd& nu,
                              const FrequencyGrid& fgrid, std::size_t L_max);
Eigen::MatrixXd build_filters(const EigenSystem& eigsys, const PhaseMultiplier& nu, std::size_t k,
                              const FrequencyGrid& fgrid, std::size_t L_max);

/// Smallest L with sum_{|l|<=L} ||phi_l||^2 >= 1 - eps; L_max when unreachable.
/// `squared_norms` is indexed by l + L_max.
std::size_t select_L_k(const std::vector<double>& squared_norms, double eps, std::size_t L_max);

/// Real filters phi_kl on a TimeGrid for k < K and |l| <= L_k.
class FilterBank {
 public:
  FilterBank() = default;
  /// filters[k] is M_t x (2 L_k + 1), column l + L_k.
  FilterBank(TimeGrid grid, std::vector<Eigen::MatrixXd> filters);

  std::size_t K() const { return filters_.size(); }
  std::size_t L(std::size_t k) const { return static_cast<std::size_t>((filters_.at(k).cols() - 1) / 2); }
  std::vector<std::size_t> L_list() const;
  const TimeGrid& grid() const { return grid_; }
  const Eigen::MatrixXd& filters(std::size_t k) const { return filters_.at(k); }
  Eigen::VectorXd filter(std::size_t k, long l) const;
  /// phi_kl(t) by linear interpolation on the grid.
  double value(std::size_t k, long l, double t) const;
  /// sum_{|l|<=L_k} ||phi_kl||^2.
  double total_squared_norm(std::size_t k) const;

  /// Per-k phase multipliers and the untruncated filters, kept for diagnostics.
  std::vector<Eigen::VectorXcd> phases;
  std::vector<double> phase_objectives;
  std::vector<std::vector<double>> lag_squared_norms;  // per k, indexed by l + L_max

 private:
  TimeGrid grid_;
  std::vector<Eigen::MatrixXd> filters_;
};

struct FilterOptions {
  std::size_t L_max = 5;
  double eps = 0.1;
  /// Forces every L_k when set.
  std::optional<std::size_t> L_fixed;
  PhaseOptions phase;
};

/// Phase optimisation, filter construction and L_k selection for the first K components.
FilterBank build_filter_bank(const EigenSystem& eigsys, std::size_t K, const TimeGrid& tgrid,
                             const FrequencyGrid& fgrid, const FilterOptions& options = {},
                             std::size_t threads = 1);

}  // namespace smpca
