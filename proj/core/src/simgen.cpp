#include "smpca/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "smpca/error.hpp"

namespace smpca {

namespace {

double latent_value(const std::vector<Eigen::MatrixXd>& scores, const Eigen::VectorXd& w, std::size_t p,
                    std::size_t L, std::size_t i, std::size_t j, double t) {
  double value = 0.0;
  const auto Ll = static_cast<long>(L);
  for (std::size_t k = 0; k < scores.size(); ++k)
    for (long l = -Ll; l <= Ll; ++l)
      value += w[l + Ll] * true_filter(p, i, k, l, L, t) *
               scores[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(static_cast<long>(j) + l + Ll));
  return value;
}

}  // namespace

void SimConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
  if (p < 1) fail("p", "must be at least 1");
  if (J < 1) fail("J", "must be at least 1");
  if (K < 1) fail("K", "must be at least 1");
  if (case_id < 1 || case_id > 3) fail("case", "must be 1, 2 or 3");
  if (grid_points < 2) fail("grid_points", "must be at least 2");
  if (n_min < 1 || n_min > n_max) fail("nrange", "needs 1 <= min <= max");
  if (n_max > grid_points) fail("nrange", "max exceeds the number of candidate sites");
  if (kappa < 0.0 || kappa > static_cast<double>(p)) fail("kappa", "kappa / p must lie in [0, 1]");
  if (!(r1 > 0.0 && r1 < r2)) fail("r1/r2", "needs 0 < r1 < r2");
  if (case_id != 3 && !(std::abs(rho) < 1.0)) fail("rho", "must lie in (-1, 1)");
  if (case_id == 2 && !(t_df > 2.0)) fail("t_df", "must exceed 2");
  if (!(noise_ratio >= 0.0)) fail("noise_ratio", "must be nonnegative");
  if (calibration_curves < 1) fail("calibration_curves", "must be at least 1");
}

std::mt19937_64 make_stream(std::uint64_t seed, Stream purpose, std::uint64_t extra) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(extra),
                    static_cast<std::uint32_t>(extra >> 32)};
  return std::mt19937_64(seq);
}

PrecisionSpec gen_precision(std::size_t p, std::size_t k, double kappa, double r1, double r2, std::mt19937_64& rng) {
  if (p < 1) throw ArgumentError("p must be positive");
  const double prob = kappa / static_cast<double>(p);
  if (prob < 0.0 || prob > 1.0) throw ArgumentError("kappa / p must lie in [0, 1]");
  if (!(r1 > 0.0 && r1 < r2)) throw ArgumentError("need 0 < r1 < r2");
  const double scale = std::exp(static_cast<double>(k) / 10.0) / 5.0;
  std::bernoulli_distribution edge(prob);
  std::uniform_real_distribution<double> magnitude(r1, r2);
  std::bernoulli_distribution negative(0.5);

  PrecisionSpec spec;
  for (spec.attempts = 1; spec.attempts <= 100; ++spec.attempts) {
    spec.theta = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) * scale;
    spec.edges.clear();
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a + 1; b < p; ++b) {
        if (!edge(rng)) continue;
        const double r = magnitude(rng) * (negative(rng) ? -1.0 : 1.0);
        spec.theta(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r * scale;
        spec.theta(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r * scale;
        spec.edges.emplace_back(a, b);
      }
    const Eigen::LLT<Eigen::MatrixXd> llt(spec.theta);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) return spec;
  }
  throw GenerationError("no positive definite precision after 100 draws (p=" + std::to_string(p) +
                        ", kappa=" + std::to_string(kappa) + ", r=[" + std::to_string(r1) + "," + std::to_string(r2) + "])");
}

std::vector<Eigen::MatrixXd> gen_scores(const std::vector<PrecisionSpec>& precision, double rho, std::size_t T,
                                        int case_id, std::size_t burn_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::MatrixXd> out;
  for (const auto& spec : precision) {
    const Eigen::LLT<Eigen::MatrixXd> llt(spec.theta);
    if (llt.info() != Eigen::Success) throw GenerationError("innovation precision is not positive definite");
    const Eigen::Index p = spec.theta.rows();
    Eigen::MatrixXd path(p, static_cast<Eigen::Index>(T));
    Eigen::VectorXd state = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd z(p);
    for (std::size_t step = 0; step < burn_in + T; ++step) {
      for (Eigen::Index a = 0; a < p; ++a) z[a] = normal(rng);
      // b = L^{-T} z has covariance (L L^T)^{-1} = Theta^{-1}.
      const Eigen::VectorXd b = llt.matrixU().solve(z);
      Eigen::VectorXd next = rho * state + b;
      if (case_id == 3) next += state.array().sin().matrix();
      state = next;
      if (step >= burn_in) path.col(static_cast<Eigen::Index>(step - burn_in)) = state;
    }
    out.push_back(std::move(path));
  }
  return out;
}

Eigen::VectorXd lag_weights(std::size_t L) {
  const auto n = static_cast<Eigen::Index>(2 * L + 1);
  Eigen::VectorXd w(n);
  for (Eigen::Index c = 0; c < n; ++c) w[c] = std::exp(-std::abs(static_cast<double>(c) - static_cast<double>(L)) / 2.0);
  return (w / w.sum()).cwiseSqrt();
}

double fourier_basis(std::size_t slot, double t) {
  const double r = static_cast<double>(slot / 2 + 1);
  const double arg = 2.0 * std::numbers::pi * r * t;
  return std::numbers::sqrt2 * (slot % 2 == 0 ? std::sin(arg) : std::cos(arg));
}

double true_filter(std::size_t p, std::size_t i, std::size_t k, long l, std::size_t L, double t) {
  const std::size_t slot = k * (2 * L + 1) + static_cast<std::size_t>(l + static_cast<long>(L));
  return fourier_basis(slot, t) * (1.0 + std::sin(static_cast<double>(i + 1) * t / static_cast<double>(p)));
}

BasisSet gen_basis(std::size_t p, std::size_t K, std::size_t L, const TimeGrid& grid) {
  BasisSet out;
  out.weights = lag_weights(L);
  const auto Ll = static_cast<long>(L);
  out.filters.assign(p, std::vector<Eigen::MatrixXd>(K));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      Eigen::MatrixXd f(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(2 * L + 1));
      for (std::size_t m = 0; m < grid.size(); ++m)
        for (long l = -Ll; l <= Ll; ++l) f(static_cast<Eigen::Index>(m), l + Ll) = true_filter(p, i, k, l, L, grid[m]);
      out.filters[i][k] = std::move(f);
    }
  return out;
}

double TruthPanel::latent(std::size_t i, std::size_t j, double t) const {
  return latent_value(scores, lag_weights(config.L), config.p, config.L, i, j, t);
}

CurvePanel TruthPanel::latent_panel(const TimeGrid& grid, std::size_t first, std::size_t count) const {
  if (first + count > config.total_curves()) throw ArgumentError("latent curves requested beyond the generated panel");
  const Eigen::VectorXd w = lag_weights(config.L);
  CurvePanel out{grid, {}};
  for (std::size_t i = 0; i < config.p; ++i) {
    Eigen::MatrixXd curves(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t c = 0; c < count; ++c)
      for (std::size_t m = 0; m < grid.size(); ++m)
        curves(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(m)) =
            latent_value(scores, w, config.p, config.L, i, first + c, grid[m]);
    out.subject.push_back(std::move(curves));
  }
  return out;
}

TruthPanel gen_panel(const SimConfig& config) {
  config.validate();
  TruthPanel truth;
  truth.config = config;
  const std::size_t p = config.p, L = config.L;

  auto precision_rng = make_stream(config.seed, Stream::Precision);
  std::vector<PrecisionSpec> specs;
  for (std::size_t k = 0; k < config.K; ++k) {
    specs.push_back(gen_precision(p, k + 1, config.kappa, config.r1, config.r2, precision_rng));
    truth.precision.push_back(specs.back().theta);
  }

  auto score_rng = make_stream(config.seed, Stream::Scores);
  truth.scores = gen_scores(specs, config.rho, config.total_curves() + 2 * L, config.case_id, config.burn_in, score_rng);

  // E||eps_i1||^2 by Monte Carlo over a separate stationary path on a fine quadrature grid.
  const TimeGrid fine = TimeGrid::uniform(201);
  const Eigen::VectorXd w = lag_weights(L);
  auto calibration_rng = make_stream(config.seed, Stream::Calibration);
  const auto calibration = gen_scores(specs, config.rho, config.calibration_curves + 2 * L, config.case_id,
                                      config.burn_in, calibration_rng);
  truth.energy.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    double acc = 0.0;
    Eigen::VectorXd values(static_cast<Eigen::Index>(fine.size()));
    for (std::size_t j = 0; j < config.calibration_curves; ++j) {
      for (std::size_t m = 0; m < fine.size(); ++m)
        values[static_cast<Eigen::Index>(m)] = latent_value(calibration, w, p, L, i, j, fine[m]);
      acc += squared_norm(values, fine);
    }
    truth.energy[i] = acc / static_cast<double>(config.calibration_curves);
    truth.noise_variance.push_back(config.noise_ratio * truth.energy[i]);
  }

  const TimeGrid sites = TimeGrid::uniform(config.grid_points);
  auto site_rng = make_stream(config.seed, Stream::Sites);
  auto noise_rng = make_stream(config.seed, Stream::Noise);
  std::uniform_int_distribution<std::size_t> count_dist(config.n_min, config.n_max);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::student_t_distribution<double> student(config.t_df);
  std::vector<std::size_t> candidates(config.grid_points);

  truth.observations = ObservationSet(p, config.total_curves());
  for (std::size_t i = 0; i < p; ++i) {
    const double sd = std::sqrt(truth.noise_variance[i]);
    const double c_i = std::sqrt((config.t_df - 2.0) / config.t_df * truth.noise_variance[i]);
    for (std::size_t j = 0; j < config.total_curves(); ++j) {
      const std::size_t n = count_dist(site_rng);
      std::iota(candidates.begin(), candidates.end(), std::size_t{0});
      for (std::size_t z = 0; z < n; ++z) {
        std::uniform_int_distribution<std::size_t> pick(z, config.grid_points - 1);
        std::swap(candidates[z], candidates[pick(site_rng)]);
      }
      std::vector<std::size_t> chosen(candidates.begin(), candidates.begin() + static_cast<long>(n));
      std::sort(chosen.begin(), chosen.end());
      for (std::size_t m : chosen) {
        const double t = sites[m];
        const double tau = config.case_id == 2 ? c_i * student(noise_rng) : sd * normal(noise_rng);
        truth.observations.add(i, j, t, latent_value(truth.scores, w, p, L, i, j, t) + tau);
      }
    }
  }
  if (config.noise_ratio > 0.0) truth.observations.set_noise_variances(truth.noise_variance);
  return truth;
}

}  // namespace smpca
