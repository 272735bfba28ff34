#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "smpca/filters.hpp"
#include "smpca/grid.hpp"
#include "smpca/observations.hpp"
#include "smpca/scores.hpp"
#include "smpca/smoothing.hpp"
#include "smpca/spectral.hpp"

namespace smpca {

/// Which spectral density drives the filters.
enum class Method {
  /// One shared filter bank from the cross-subject average of f_ii.
  SpectralMpca,
  /// A separate filter bank per subject from its own f_ii.
  IndividualSpectral,
};

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct FitOptions {
  std::size_t time_points = 51;
  std::size_t freq_points = 128;
  SmoothingOptions smoothing;
  std::optional<std::size_t> h_max;
  std::optional<std::size_t> K;
  std::size_t K_max = 5;
  FilterOptions filters;
  SolverOptions solver;
  Method method = Method::SpectralMpca;
  std::size_t threads = 1;
};

/// Everything estimated from the raw observations before any method-specific step.
struct Moments {
  Grids grids;
  MeanFunctions means;
  AutocovField autocov;
  std::vector<double> noise;
  std::size_t h_max = 1;
  std::vector<SpectralField> subject_fields;
};

/// Means, lagged autocovariances, noise variances and per-subject Bartlett fields.
Moments estimate_moments(const ObservationSet& obs, const FitOptions& options);

/// Bartlett fields rebuilt on a frequency grid for a different series length, keeping
/// every smoothed moment.
Moments with_series_length(const Moments& moments, std::size_t J);

/// A set of subjects sharing one filter bank.
struct ModelGroup {
  std::vector<std::size_t> subjects;
  std::size_t K = 0;
  FilterBank bank;
  std::vector<Eigen::MatrixXd> eta;  // per member: K x J on the Whittle set
  ScoreArray scores;
  std::vector<double> integrated_eigenvalues;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  std::size_t solver_iterations = 0;
};

struct FittedModel {
  Method method = Method::SpectralMpca;
  std::size_t p = 0;
  std::size_t J = 0;
  std::size_t time_points = 0;
  std::size_t freq_points = 0;
  TimeGrid time;
  MeanFunctions means;
  std::vector<double> noise;
  std::size_t h_max = 1;
  std::vector<ModelGroup> groups;
  std::string config_hash;
  std::vector<std::string> warnings;

  /// Group index and position within the group for subject i.
  std::pair<std::size_t, std::size_t> locate(std::size_t i) const;
};

/// Method-specific steps on precomputed moments: eigendecomposition, K selection,
/// filters, score spectral densities and MAP scores.
FittedModel fit_from_moments(const ObservationSet& obs, const Moments& moments, const FitOptions& options);

/// Full estimation from raw observations.
FittedModel fit_model(const ObservationSet& obs, const FitOptions& options);

}  // namespace smpca
