#include "smpca/metrics.hpp"

#include "smpca/error.hpp"

namespace smpca {

double nmse(const CurvePanel& truth, const CurvePanel& estimate) {
  if (truth.subjects() != estimate.subjects() || truth.curves() != estimate.curves())
    throw DimensionError("metric: curve panels differ in shape");
  if (!truth.grid.same_as(estimate.grid)) throw DimensionError("metric: curve panels use different grids");
  const Eigen::VectorXd& w = truth.grid.weights();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.subjects(); ++i) {
    num += ((truth.subject[i] - estimate.subject[i]).array().square().matrix() * w).sum();
    den += (truth.subject[i].array().square().matrix() * w).sum();
  }
  if (!(den > 0.0)) throw NumericError("metric undefined: the true curves are identically zero");
  return num / den;
}

double nmse_observed(const FittedModel& model, const ObservationSet& held_out, long first_curve) {
  if (held_out.subjects() != model.p) throw DimensionError("held-out panel has the wrong subject count");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < held_out.subjects(); ++i)
    for (std::size_t j = 0; j < held_out.curves(); ++j) {
      const Curve& c = held_out.curve(i, j);
      for (std::size_t z = 0; z < c.size(); ++z) {
        const double mu = model.means.at(i, c.times[z], model.time);
        const double fit = reconstruct_value(model, i, first_curve + static_cast<long>(j), c.times[z]);
        num += (c.values[z] - fit) * (c.values[z] - fit);
        den += (c.values[z] - mu) * (c.values[z] - mu);
      }
    }
  if (!(den > 0.0)) throw NumericError("metric undefined: held-out values have no spread");
  return num / den;
}

}  // namespace smpca
