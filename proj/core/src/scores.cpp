#include "smpca/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/IterativeLinearSolvers>

#include "smpca/error.hpp"

namespace smpca {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double whittle_frequency(std::size_t j, std::size_t J) {
  return kTwoPi * static_cast<double>(j + 1) / static_cast<double>(J);
}
}  // namespace

ScoreLayout::ScoreLayout(std::size_t p, std::size_t J, std::vector<std::size_t> L) : p_(p), J_(J), L_(std::move(L)) {
  if (p == 0 || J == 0 || L_.empty()) throw ArgumentError("score layout needs p, J and K to be positive");
  for (std::size_t k = 0; k < L_.size(); ++k) {
    offsets_.push_back(size_);
    size_ += p_ * T(k);
  }
}

std::size_t ScoreLayout::column(std::size_t i, long j, std::size_t k) const {
  const long r = j + static_cast<long>(L_.at(k));
  if (i >= p_ || r < 0 || r >= static_cast<long>(T(k))) throw ArgumentError("score index out of range");
  return column_at(i, static_cast<std::size_t>(r), k);
}

ScoreArray::ScoreArray(ScoreLayout l, Eigen::VectorXd v) : layout(std::move(l)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != layout.size()) throw DimensionError("score vector / layout mismatch");
}

Eigen::MatrixXd ScoreArray::series(std::size_t k) const {
  const std::size_t p = layout.subjects(), T = layout.T(k);
  return Eigen::Map<const Eigen::MatrixXd>(values.data() + layout.offset(k), static_cast<Eigen::Index>(p),
                                           static_cast<Eigen::Index>(T));
}

DesignSystem build_design(const ObservationSet& obs, const FilterBank& bank, const ScoreLayout& layout,
                          const MeanFunctions& means, const std::vector<double>& noise) {
  if (obs.subjects() != layout.subjects() || obs.curves() != layout.curves())
    throw DimensionError("observations do not match the score layout");
  if (bank.K() != layout.K()) throw DimensionError("filter bank does not match the score layout");
  for (std::size_t k = 0; k < bank.K(); ++k)
    if (bank.L(k) != layout.L(k)) throw DimensionError("filter bank lags do not match the score layout");
  if (!means.subject.empty() && means.subjects() != obs.subjects()) throw DimensionError("mean functions: wrong p");
  if (!noise.empty() && noise.size() != obs.subjects()) throw DimensionError("noise variances: wrong p");

  DesignSystem out;
  const std::size_t n = obs.total_count();
  out.y.resize(static_cast<Eigen::Index>(n));
  out.weights.resize(static_cast<Eigen::Index>(n));
  out.rows.reserve(n);
  std::vector<Eigen::Triplet<double>> triplets;
  std::size_t row = 0;
  for (std::size_t i = 0; i < obs.subjects(); ++i) {
    const double weight = noise.empty() ? 1.0 : 1.0 / noise[i];
    for (std::size_t j = 0; j < obs.curves(); ++j) {
      const Curve& c = obs.curve(i, j);
      for (std::size_t z = 0; z < c.size(); ++z, ++row) {
        const double t = c.times[z];
        if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("observation time outside [0,1]");
        const auto ri = static_cast<Eigen::Index>(row);
        out.y[ri] = c.values[z] - (means.subject.empty() ? 0.0 : means.at(i, t, bank.grid()));
        out.weights[ri] = weight;
        out.rows.push_back({i, j, z});
        for (std::size_t k = 0; k < bank.K(); ++k) {
          const auto L = static_cast<long>(bank.L(k));
          for (long l = -L; l <= L; ++l)
            triplets.emplace_back(ri, static_cast<Eigen::Index>(layout.column(i, static_cast<long>(j) + l, k)),
                                  bank.value(k, l, t));
        }
      }
    }
  }
  out.A.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layout.size()));
  out.A.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

WhittlePrecision::WhittlePrecision(const std::vector<Eigen::MatrixXd>& eta, const ScoreLayout& layout)
    : layout_(layout) {
  const std::size_t p = layout.subjects(), J = layout.curves(), K = layout.K();
  if (eta.size() != p) throw DimensionError("score spectral density: wrong subject count");
  double peak = 0.0;
  for (const auto& e : eta) {
    if (static_cast<std::size_t>(e.rows()) < K || static_cast<std::size_t>(e.cols()) != J)
      throw DimensionError("score spectral density must be K x J per subject");
    peak = std::max(peak, e.topRows(static_cast<Eigen::Index>(K)).maxCoeff());
  }
  if (!(peak > 0.0)) throw NumericError("score spectral density is identically zero");
  const double floor = 1e-8 * peak;
  for (std::size_t k = 0; k < K; ++k) {
    Eigen::MatrixXd ek(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(J));
    for (std::size_t i = 0; i < p; ++i) ek.row(static_cast<Eigen::Index>(i)) = eta[i].row(static_cast<Eigen::Index>(k)).cwiseMax(floor);
    const std::size_t T = layout.T(k);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(T));
    const double norm = 1.0 / (kTwoPi * static_cast<double>(T));
    for (std::size_t d = 0; d < T; ++d)
      for (std::size_t j = 0; j < J; ++j) {
        const double c = std::cos(static_cast<double>(d) * whittle_frequency(j, J)) * norm;
        for (std::size_t i = 0; i < p; ++i)
          q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) += c / ek(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    eta_.push_back(std::move(ek));
    toeplitz_.push_back(std::move(q));
  }
}

Eigen::MatrixXcd WhittlePrecision::dense() const {
  const auto n = static_cast<Eigen::Index>(layout_.size());
  Eigen::MatrixXcd Q = Eigen::MatrixXcd::Zero(n, n);
  const std::size_t p = layout_.subjects(), J = layout_.curves();
  for (std::size_t k = 0; k < layout_.K(); ++k) {
    const std::size_t T = layout_.T(k);
    const double norm = 1.0 / (kTwoPi * static_cast<double>(T));
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t r = 0; r < T; ++r)
        for (std::size_t s = 0; s < T; ++s) {
          cdouble acc = 0.0;
          const double d = static_cast<double>(s) - static_cast<double>(r);
          for (std::size_t j = 0; j < J; ++j) acc += std::polar(norm / eta(i, k, j), d * whittle_frequency(j, J));
          Q(static_cast<Eigen::Index>(layout_.column_at(i, r, k)), static_cast<Eigen::Index>(layout_.column_at(i, s, k))) = acc;
        }
  }
  return Q;
}

Eigen::MatrixXd WhittlePrecision::real_dense() const {
  const auto n = static_cast<Eigen::Index>(layout_.size());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < layout_.K(); ++k) {
    const std::size_t T = layout_.T(k);
    for (std::size_t i = 0; i < layout_.subjects(); ++i)
      for (std::size_t r = 0; r < T; ++r)
        for (std::size_t s = 0; s < T; ++s)
          Q(static_cast<Eigen::Index>(layout_.column_at(i, r, k)), static_cast<Eigen::Index>(layout_.column_at(i, s, k))) =
              toeplitz_[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r > s ? r - s : s - r));
  }
  return Q;
}

Eigen::VectorXd WhittlePrecision::apply_real(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != layout_.size()) throw DimensionError("Whittle precision: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  const auto p = static_cast<Eigen::Index>(layout_.subjects());
  for (std::size_t k = 0; k < layout_.K(); ++k) {
    const auto T = static_cast<Eigen::Index>(layout_.T(k));
    const auto off = static_cast<Eigen::Index>(layout_.offset(k));
    Eigen::Map<const Eigen::MatrixXd> xs(x.data() + off, p, T);
    Eigen::Map<Eigen::MatrixXd> ys(out.data() + off, p, T);
    const Eigen::MatrixXd& q = toeplitz_[k];
    for (Eigen::Index r = 0; r < T; ++r)
      for (Eigen::Index s = 0; s < T; ++s) ys.col(r) += q.col(std::abs(r - s)).cwiseProduct(xs.col(s));
  }
  return out;
}

cdouble WhittlePrecision::quadratic_form(const Eigen::VectorXcd& x) const {
  if (static_cast<std::size_t>(x.size()) != layout_.size()) throw DimensionError("Whittle precision: size mismatch");
  return x.dot(dense() * x);
}

void WhittlePrecision::append_real(std::vector<Eigen::Triplet<double>>& triplets) const {
  for (std::size_t k = 0; k < layout_.K(); ++k) {
    const std::size_t T = layout_.T(k);
    for (std::size_t i = 0; i < layout_.subjects(); ++i)
      for (std::size_t r = 0; r < T; ++r)
        for (std::size_t s = 0; s < T; ++s)
          triplets.emplace_back(static_cast<Eigen::Index>(layout_.column_at(i, r, k)),
                                static_cast<Eigen::Index>(layout_.column_at(i, s, k)),
                                toeplitz_[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r > s ? r - s : s - r)));
  }
}

MapResult map_scores(const DesignSystem& design, const WhittlePrecision& Q, const SolverOptions& options) {
  const auto d = static_cast<Eigen::Index>(Q.layout().size());
  if (design.A.cols() != d) throw DimensionError("design matrix / precision size mismatch");
  if (design.A.rows() != design.y.size() || design.y.size() != design.weights.size())
    throw DimensionError("design matrix / response size mismatch");

  MapResult out;
  const Eigen::VectorXd rhs = design.A.transpose() * design.weights.cwiseProduct(design.y);
  Eigen::SparseMatrix<double> system = design.A.transpose() * design.weights.asDiagonal() * design.A;
  std::vector<Eigen::Triplet<double>> triplets;
  Q.append_real(triplets);
  Eigen::SparseMatrix<double> prior(d, d);
  prior.setFromTriplets(triplets.begin(), triplets.end());
  system += prior;

  const Eigen::VectorXd diag = system.diagonal();
  const double top = diag.cwiseAbs().maxCoeff();
  if ((diag.array() <= 1e-14 * std::max(top, 1e-300)).any()) {
    for (Eigen::Index c = 0; c < d; ++c) system.coeffRef(c, c) += 1e-10;
    out.ridge = true;
    out.warnings.emplace_back("score system is singular; added a 1e-10 ridge");
  }
  system.makeCompressed();

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double>>
      cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(static_cast<Eigen::Index>(options.max_iterations ? options.max_iterations : 10 * static_cast<std::size_t>(d)));
  cg.compute(system);
  if (rhs.norm() == 0.0) {
    out.xi = Eigen::VectorXd::Zero(d);
    return out;
  }
  out.xi = cg.solve(rhs);
  out.iterations = static_cast<std::size_t>(cg.iterations());
  out.relative_residual = (system * out.xi - rhs).norm() / rhs.norm();
  if (cg.info() != Eigen::Success || !out.xi.allFinite())
    throw NumericError("conjugate gradients did not converge after " + std::to_string(out.iterations) +
                       " iterations (relative residual " + format_double(out.relative_residual) + ")");
  return out;
}

double posterior_objective(const DesignSystem& design, const WhittlePrecision& Q, const Eigen::VectorXd& xi) {
  const Eigen::VectorXd r = design.y - design.A * xi;
  return 0.5 * r.dot(design.weights.cwiseProduct(r)) + 0.5 * xi.dot(Q.apply_real(xi));
}

Eigen::VectorXd posterior_gradient(const DesignSystem& design, const WhittlePrecision& Q, const Eigen::VectorXd& xi) {
  return design.A.transpose() * design.weights.cwiseProduct(design.y - design.A * xi) - Q.apply_real(xi);
}

Eigen::VectorXd posterior_gradient_blockwise(const ObservationSet& obs, const FilterBank& bank,
                                             const ScoreLayout& layout, const MeanFunctions& means,
                                             const std::vector<double>& noise, const WhittlePrecision& Q,
                                             const Eigen::VectorXd& xi) {
  const ScoreArray scores(layout, xi);
  const std::size_t p = layout.subjects(), J = layout.curves(), K = layout.K();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(xi.size());

  for (std::size_t i = 0; i < p; ++i) {
    const double inv_var = noise.empty() ? 1.0 : 1.0 / noise[i];
    // Per-curve filter matrices phi_ikj (N_ij x T_k) and demeaned responses.
    std::vector<std::vector<Eigen::MatrixXd>> phi(K, std::vector<Eigen::MatrixXd>(J));
    std::vector<Eigen::RowVectorXd> ytilde(J);
    for (std::size_t j = 0; j < J; ++j) {
      const Curve& c = obs.curve(i, j);
      ytilde[j].resize(static_cast<Eigen::Index>(c.size()));
      for (std::size_t z = 0; z < c.size(); ++z)
        ytilde[j][static_cast<Eigen::Index>(z)] =
            c.values[z] - (means.subject.empty() ? 0.0 : means.at(i, c.times[z], bank.grid()));
      for (std::size_t k = 0; k < K; ++k) {
        const auto L = static_cast<long>(layout.L(k));
        phi[k][j] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(layout.T(k)));
        for (std::size_t z = 0; z < c.size(); ++z)
          for (long l = -L; l <= L; ++l)
            phi[k][j](static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(static_cast<long>(j) + l + L)) =
                bank.value(k, l, c.times[z]);
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t T = layout.T(k);
      Eigen::RowVectorXd likelihood = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(T));
      for (std::size_t kp = 0; kp < K; ++kp) {
        const Eigen::RowVectorXd xi_ikp = scores.series(kp).row(static_cast<Eigen::Index>(i));
        Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.T(kp)), static_cast<Eigen::Index>(T));
        for (std::size_t j = 0; j < J; ++j) cross += phi[kp][j].transpose() * phi[k][j];
        likelihood += xi_ikp * cross;
      }
      for (std::size_t j = 0; j < J; ++j) likelihood -= ytilde[j] * phi[k][j];
      likelihood *= -inv_var;

      // Re{ sum_j Phi_k(omega_j) Xi_k rho(omega_j) rho(omega_j)^* }, row i.
      const Eigen::MatrixXd Xi = scores.series(k);
      Eigen::RowVectorXcd prior = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(T));
      const double norm = 1.0 / std::sqrt(kTwoPi * static_cast<double>(T));
      for (std::size_t j = 0; j < J; ++j) {
        const double omega = whittle_frequency(j, J);
        Eigen::VectorXcd rho(static_cast<Eigen::Index>(T));
        for (std::size_t r = 0; r < T; ++r) rho[static_cast<Eigen::Index>(r)] = std::polar(norm, -static_cast<double>(r + 1) * omega);
        const cdouble projected = Xi.row(static_cast<Eigen::Index>(i)).cast<cdouble>() * rho;
        prior += (projected / Q.eta(i, k, j)) * rho.adjoint();
      }
      const Eigen::RowVectorXd total = likelihood - prior.real();
      for (std::size_t r = 0; r < T; ++r)
        grad[static_cast<Eigen::Index>(layout.column_at(i, r, k))] = total[static_cast<Eigen::Index>(r)];
    }
  }
  return grad;
}

}  // namespace smpca
