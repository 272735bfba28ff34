#include "smpca/pipeline.hpp"

#include <algorithm>

#include "smpca/error.hpp"

namespace smpca {

std::string method_name(Method m) {
  return m == Method::SpectralMpca ? "spectral_mpca" : "individual_spectral";
}

Method parse_method(const std::string& name) {
  if (name == "spectral_mpca") return Method::SpectralMpca;
  if (name == "individual_spectral") return Method::IndividualSpectral;
  throw ConfigError("unknown method '" + name + "' (expected spectral_mpca or individual_spectral)");
}

std::pair<std::size_t, std::size_t> FittedModel::locate(std::size_t i) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& s = groups[g].subjects;
    const auto it = std::find(s.begin(), s.end(), i);
    if (it != s.end()) return {g, static_cast<std::size_t>(it - s.begin())};
  }
  throw ArgumentError("subject not covered by the model");
}

Moments estimate_moments(const ObservationSet& obs, const FitOptions& options) {
  if (obs.subjects() == 0 || obs.curves() == 0) throw InsufficientDataError("empty observation panel");
  Moments m;
  m.grids = build_uniform_grids(options.time_points, options.freq_points, obs.curves());
  m.means = estimate_means(obs, m.grids.time, options.smoothing);
  m.h_max = options.h_max.value_or(select_h_max(obs.curves(), obs.mean_count()));
  if (m.h_max < 1) throw ArgumentError("h_max must be at least 1");
  if (m.h_max > obs.curves()) throw ArgumentError("h_max exceeds the series length");
  m.autocov = estimate_autocov_field(obs, m.means, m.h_max - 1, m.grids.time, options.smoothing, options.threads);
  m.noise = estimate_noise_variances(obs, m.means, m.grids.time, options.smoothing);
  for (std::size_t i = 0; i < obs.subjects(); ++i)
    m.subject_fields.push_back(bartlett_spectral(m.autocov, i, m.h_max, m.grids.frequency));
  return m;
}

Moments with_series_length(const Moments& moments, std::size_t J) {
  Moments m = moments;
  // Same lattice, new Whittle set.
  std::size_t lattice = 0;
  for (std::size_t a : moments.grids.frequency.nonnegative())
    if (moments.grids.frequency.weights()[static_cast<Eigen::Index>(a)] > 0.0) ++lattice;
  m.grids.frequency = FrequencyGrid(lattice - 1, J);
  m.subject_fields.clear();
  for (std::size_t i = 0; i < m.autocov.subjects(); ++i)
    m.subject_fields.push_back(bartlett_spectral(m.autocov, i, m.h_max, m.grids.frequency));
  return m;
}

namespace {

ModelGroup fit_group(const ObservationSet& obs, const Moments& moments, const std::vector<std::size_t>& members,
                     const FitOptions& options, std::vector<std::string>& warnings) {
  const TimeGrid& tgrid = moments.grids.time;
  const FrequencyGrid& fgrid = moments.grids.frequency;
  ModelGroup g;
  g.subjects = members;

  std::vector<SpectralField> fields;
  for (std::size_t i : members) fields.push_back(moments.subject_fields.at(i));
  const SpectralField marginal = marginal_spectral(fields);

  const std::size_t depth = std::max(options.K_max, options.K.value_or(1));
  const EigenSystem eig = eigendecompose_per_frequency(marginal, tgrid, fgrid, depth, options.threads);
  g.integrated_eigenvalues = integrated_eigenvalues(eig, fgrid);
  g.min_eigenvalue = eig.min_eigenvalue;
  g.max_eigenvalue = eig.max_eigenvalue;
  g.K = options.K ? *options.K : select_K(eig, fgrid, options.K_max);
  if (g.K > eig.components()) throw ArgumentError("K exceeds the number of time grid points");

  g.bank = build_filter_bank(eig, g.K, tgrid, fgrid, options.filters, options.threads);
  g.eta = score_spectral_density(eig, g.K, fields, tgrid, fgrid);

  const ObservationSet sub = obs.select_subjects(members);
  MeanFunctions means;
  std::vector<double> noise;
  for (std::size_t i : members) {
    means.subject.push_back(moments.means.subject.at(i));
    noise.push_back(moments.noise.at(i));
  }
  const ScoreLayout layout(members.size(), obs.curves(), g.bank.L_list());
  const DesignSystem design = build_design(sub, g.bank, layout, means, noise);
  const WhittlePrecision Q(g.eta, layout);
  MapResult map = map_scores(design, Q, options.solver);
  for (auto& w : map.warnings) warnings.push_back(std::move(w));
  g.solver_iterations = map.iterations;
  g.scores = ScoreArray(layout, std::move(map.xi));
  return g;
}

}  // namespace

FittedModel fit_from_moments(const ObservationSet& obs, const Moments& moments, const FitOptions& options) {
  if (moments.means.subjects() != obs.subjects()) throw DimensionError("moments do not match the panel");
  if (moments.grids.frequency.whittle_length() != obs.curves())
    throw DimensionError("moments were built for a different series length");
  FittedModel model;
  model.method = options.method;
  model.p = obs.subjects();
  model.J = obs.curves();
  model.time_points = options.time_points;
  model.freq_points = options.freq_points;
  model.time = moments.grids.time;
  model.means = moments.means;
  model.noise = moments.noise;
  model.h_max = moments.h_max;

  std::vector<std::vector<std::size_t>> memberships;
  if (options.method == Method::SpectralMpca) {
    std::vector<std::size_t> all(obs.subjects());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    memberships.push_back(std::move(all));
  } else {
    for (std::size_t i = 0; i < obs.subjects(); ++i) memberships.push_back({i});
  }
  for (const auto& members : memberships) model.groups.push_back(fit_group(obs, moments, members, options, model.warnings));
  return model;
}

FittedModel fit_model(const ObservationSet& obs, const FitOptions& options) {
  return fit_from_moments(obs, estimate_moments(obs, options), options);
}

}  // namespace smpca
