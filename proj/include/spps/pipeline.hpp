#pragma once

#include <Eigen/Dense>

#include "spps/estimators.hpp"
#include "spps/link.hpp"
#include "spps/spps_fit.hpp"
#include "spps/types.hpp"

namespace spps {

/// Which propensity fit feeds which estimator.
struct EstimatorSpec {
  Estimand estimand = Estimand::ate;
  Variant variant = Variant::O;
  Link link = Link::logistic();
  FitOptions fit;
};

inline Mode mode_for(Estimand estimand) {
  return estimand == Estimand::ate ? Mode::treatment : Mode::missing_data;
}

/// Fitted propensities for a variant: plain GLM for O/LD, bounded model for P/PLD.
inline Eigen::VectorXd fit_propensities(const Dataset& data, const EstimatorSpec& spec) {
  if (uses_bounded_model(spec.variant))
    return fit_spps(data, spec.link, mode_for(spec.estimand), spec.fit).fitted;
  const StepResult plain = fit_plain_glm(data, spec.link, spec.fit.controls);
  return evaluate_propensities(data, Theta::plain(plain.value, mode_for(spec.estimand)), spec.link);
}

inline EstimateReport estimate_from_fitted(const Dataset& data, const Eigen::VectorXd& fitted,
                                           Estimand estimand, Variant variant) {
  if (estimand == Estimand::population_mean) return estimate_mean_ipw(data, fitted, variant);
  return uses_correction(variant) ? estimate_ate_ld(data, fitted, variant)
                                  : estimate_ate_ipw(data, fitted, variant);
}

/// Full pipeline: refit the propensity model, then evaluate the estimator.
inline EstimateReport estimate(const Dataset& data, const EstimatorSpec& spec) {
  return estimate_from_fitted(data, fit_propensities(data, spec), spec.estimand, spec.variant);
}

}  // namespace spps
