#pragma once

#include "smpca/observations.hpp"
#include "smpca/pipeline.hpp"
#include "smpca/tasks.hpp"

namespace smpca {

/// sum ||truth - estimate||^2 / sum ||truth||^2 with trapezoid norms on the shared grid.
/// Used for both NMSE (imputed curves) and NMSPE (forecast curves).
double nmse(const CurvePanel& truth, const CurvePanel& estimate);

/// Observed-point variant for data without latent truth: squared errors of the fitted
/// values at the observation sites of `held_out`, over the sum of squared demeaned values.
/// Curve indices in `held_out` are read relative to `first_curve`.
double nmse_observed(const FittedModel& model, const ObservationSet& held_out, long first_curve = 0);

}  // namespace smpca
