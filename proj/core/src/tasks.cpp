#include "smpca/tasks.hpp"

#include <algorithm>

#include "smpca/error.hpp"

namespace smpca {

double reconstruct_value(const FittedModel& model, std::size_t i, long j, double t) {
  const auto [g, pos] = model.locate(i);
  const ModelGroup& group = model.groups[g];
  double value = model.means.at(i, t, model.time);
  for (std::size_t k = 0; k < group.K; ++k) {
    const auto L = static_cast<long>(group.bank.L(k));
    for (long l = -L; l <= L; ++l) value += group.bank.value(k, l, t) * group.scores.at(pos, j + l, k);
  }
  return value;
}

namespace {

// Curves from score series: series[k] is (members x T) starting at curve index -L_k.
void assemble(const FittedModel& model, const ModelGroup& group, const std::vector<Eigen::MatrixXd>& series,
              long first, std::size_t count, CurvePanel& out) {
  for (std::size_t pos = 0; pos < group.subjects.size(); ++pos) {
    const std::size_t i = group.subjects[pos];
    Eigen::MatrixXd curves = model.means.subject[i].transpose().replicate(static_cast<Eigen::Index>(count), 1);
    for (std::size_t c = 0; c < count; ++c) {
      const long j = first + static_cast<long>(c);
      for (std::size_t k = 0; k < group.K; ++k) {
        const auto L = static_cast<long>(group.bank.L(k));
        for (long l = -L; l <= L; ++l) {
          const long r = j + l + L;
          if (r < 0 || r >= series[k].cols()) throw ArgumentError("score series too short for reconstruction");
          curves.row(static_cast<Eigen::Index>(c)) +=
              series[k](static_cast<Eigen::Index>(pos), r) * group.bank.filters(k).col(l + L).transpose();
        }
      }
    }
    out.subject[i] = std::move(curves);
  }
}

}  // namespace

CurvePanel impute(const FittedModel& model) {
  CurvePanel out{model.time, std::vector<Eigen::MatrixXd>(model.p)};
  for (const auto& group : model.groups) {
    std::vector<Eigen::MatrixXd> series;
    for (std::size_t k = 0; k < group.K; ++k) series.push_back(group.scores.series(k));
    assemble(model, group, series, 0, model.J, out);
  }
  return out;
}

ForecastModel fit_var_models(const FittedModel& model, std::optional<std::size_t> P_max) {
  ForecastModel out;
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const auto& group = model.groups[g];
    std::vector<VarFit> fits;
    for (std::size_t k = 0; k < group.K; ++k) {
      VarFit fit = fit_var(group.scores.series(k), P_max);
      for (const auto& w : fit.warnings) out.warnings.push_back("group " + std::to_string(g + 1) + ", k=" + std::to_string(k + 1) + ": " + w);
      fits.push_back(std::move(fit));
    }
    out.fits.push_back(std::move(fits));
  }
  return out;
}

CurvePanel forecast(const FittedModel& model, const ForecastModel& var, std::size_t horizon) {
  if (horizon < 1) throw ArgumentError("forecast horizon must be at least 1");
  if (var.fits.size() != model.groups.size()) throw DimensionError("VAR models do not match the fitted model");
  CurvePanel out{model.time, std::vector<Eigen::MatrixXd>(model.p)};
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const auto& group = model.groups[g];
    std::vector<Eigen::MatrixXd> series;
    for (std::size_t k = 0; k < group.K; ++k) {
      const Eigen::MatrixXd history = group.scores.series(k);
      Eigen::MatrixXd extended(history.rows(), history.cols() + static_cast<Eigen::Index>(horizon));
      extended << history, forecast_var(var.fits[g].at(k), history, horizon);
      series.push_back(std::move(extended));
    }
    assemble(model, group, series, static_cast<long>(model.J), horizon, out);
  }
  return out;
}

std::string refit_name(RefitMode mode) { return mode == RefitMode::Full ? "full" : "scores_only"; }

RefitMode parse_refit(const std::string& name) {
  if (name == "full") return RefitMode::Full;
  if (name == "scores_only") return RefitMode::ScoresOnly;
  throw ConfigError("nmspe.refit must be 'full' or 'scores_only', got '" + name + "'");
}

CurvePanel rolling_one_step_forecasts(const ObservationSet& obs, std::size_t J, std::size_t P,
                                      const FitOptions& options, RefitMode mode, std::optional<std::size_t> P_max) {
  if (P < 1) throw ArgumentError("forecast horizon must be at least 1");
  if (obs.curves() < J + P - 1) throw InsufficientDataError("panel too short for the rolling forecast protocol");
  std::optional<Moments> frozen;
  if (mode == RefitMode::ScoresOnly) frozen = estimate_moments(obs.prefix(J), options);

  CurvePanel out;
  out.subject.assign(obs.subjects(), Eigen::MatrixXd());
  for (std::size_t m = 1; m <= P; ++m) {
    const std::size_t length = J + m - 1;
    const ObservationSet train = obs.prefix(length);
    const FittedModel model = frozen ? fit_from_moments(train, with_series_length(*frozen, length), options)
                                     : fit_model(train, options);
    const CurvePanel next = forecast(model, fit_var_models(model, P_max), 1);
    out.grid = next.grid;
    for (std::size_t i = 0; i < obs.subjects(); ++i) {
      if (out.subject[i].size() == 0) out.subject[i].resize(static_cast<Eigen::Index>(P), next.subject[i].cols());
      out.subject[i].row(static_cast<Eigen::Index>(m - 1)) = next.subject[i].row(0);
    }
  }
  return out;
}

double population_reconstruction_mse(const std::vector<std::map<long, Eigen::MatrixXd>>& lags,
                                     const std::vector<Eigen::MatrixXd>& phi, const std::vector<Eigen::MatrixXd>& v,
                                     const TimeGrid& grid) {
  if (phi.size() != v.size()) throw DimensionError("reconstruction and extraction banks differ in K");
  const auto M = static_cast<Eigen::Index>(grid.size());
  const Eigen::MatrixXd W = grid.weights().asDiagonal();

  // eps_hat_j = sum_d G_d eps_{j+d}, G_d = sum_k sum_{l - l' = d} phi_kl v_kl'^T W.
  std::map<long, Eigen::MatrixXd> G;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const long Lp = (phi[k].cols() - 1) / 2, Lv = (v[k].cols() - 1) / 2;
    if (phi[k].rows() != M || v[k].rows() != M) throw DimensionError("filters must live on the grid");
    for (long l = -Lp; l <= Lp; ++l)
      for (long lp = -Lv; lp <= Lv; ++lp) {
        const Eigen::MatrixXd term = phi[k].col(l + Lp) * v[k].col(lp + Lv).transpose() * W;
        auto [it, inserted] = G.try_emplace(l - lp, term);
        if (!inserted) it->second += term;
      }
  }
  auto it0 = G.try_emplace(0, Eigen::MatrixXd::Zero(M, M)).first;
  it0->second -= Eigen::MatrixXd::Identity(M, M);

  double total = 0.0;
  for (const auto& subject : lags) {
    for (const auto& [d, Md] : G)
      for (const auto& [dp, Mdp] : G) {
        const auto c = subject.find(d - dp);
        if (c == subject.end()) continue;
        total += (W * Md * c->second * Mdp.transpose()).trace();
      }
  }
  return total;
}

}  // namespace smpca
