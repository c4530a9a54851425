#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spps/errors.hpp"
#include "spps/types.hpp"

namespace spps {

enum class Estimand { population_mean, ate };

// O: plain GLM weights; P: bounded-link weights; LD/PLD: the same with the
// Lunceford-Davidian residual correction.
enum class Variant { O, P, LD, PLD };

inline std::string_view to_string(Estimand e) {
  return e == Estimand::ate ? "ate" : "population_mean";
}

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::O: return "O";
    case Variant::P: return "P";
    case Variant::LD: return "LD";
    case Variant::PLD: return "PLD";
  }
  return "?";
}

inline Variant parse_variant(std::string_view name) {
  if (name == "O") return Variant::O;
  if (name == "P") return Variant::P;
  if (name == "LD") return Variant::LD;
  if (name == "PLD") return Variant::PLD;
  throw InputError("unknown estimator variant '" + std::string(name) + "' (expected O, P, LD, PLD)");
}

inline bool uses_bounded_model(Variant v) { return v == Variant::P || v == Variant::PLD; }
inline bool uses_correction(Variant v) { return v == Variant::LD || v == Variant::PLD; }

struct WeightsSummary {
  double min = 0.0;
  double max = 0.0;
  double sum = 0.0;
};

struct BootstrapSummary {
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_boot_effective = 0;
  int n_fail = 0;
};

struct EstimateReport {
  Estimand estimand = Estimand::ate;
  Variant variant = Variant::O;
  double value = 0.0;
  WeightsSummary weights_summary;
  std::optional<double> c0;
  std::optional<double> c1;
  std::vector<std::string> warnings;
  std::optional<BootstrapSummary> bootstrap;
};

namespace detail {

class WeightTally {
 public:
  void add(double w) {
    min_ = std::min(min_, w);
    max_ = std::max(max_, w);
    sum_ += w;
    any_ = true;
  }
  WeightsSummary summary() const { return any_ ? WeightsSummary{min_, max_, sum_} : WeightsSummary{}; }

 private:
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
  bool any_ = false;
};

inline void check_fitted_length(const Dataset& data, const Eigen::VectorXd& fitted) {
  require(fitted.size() == data.rows(), "fitted propensity vector length does not match data");
}

inline const Eigen::VectorXd& require_outcome(const Dataset& data) {
  if (!data.outcome) throw InputError("dataset has no outcome column");
  return *data.outcome;
}

inline void check_ate_inputs(const Dataset& data, const Eigen::VectorXd& fitted) {
  check_fitted_length(data, fitted);
  const Eigen::VectorXd& y = require_outcome(data);
  Eigen::Index treated = 0;
  for (Eigen::Index i = 0; i < fitted.size(); ++i) {
    if (!(fitted[i] > 0.0 && fitted[i] < 1.0))
      throw EstimationError("fitted propensity " + std::to_string(fitted[i]) + " at row " +
                            std::to_string(i) + " is outside (0, 1)");
    require(std::isfinite(y[i]), "outcome missing at row " + std::to_string(i));
    treated += data.indicator[i] == 1.0;
  }
  if (treated == 0 || treated == data.rows())
    throw EstimationError("ATE needs both treated and control units");
}

}  // namespace detail

/// Horvitz-Thompson mean n^-1 sum A Y / pi.
inline EstimateReport estimate_mean_ipw(const Dataset& data, const Eigen::VectorXd& fitted,
                                        Variant variant = Variant::P) {
  detail::check_fitted_length(data, fitted);
  require(!uses_correction(variant), "no corrected variant exists for the population mean");
  EstimateReport report;
  report.estimand = Estimand::population_mean;
  report.variant = variant;
  const Eigen::Index n = data.rows();
  detail::WeightTally tally;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.indicator[i] != 1.0) continue;
    if (!(fitted[i] > 0.0))
      throw EstimationError("non-positive fitted propensity at responding row " +
                            std::to_string(i));
    const double y = data.outcome ? (*data.outcome)[i] : std::numeric_limits<double>::quiet_NaN();
    require(std::isfinite(y), "outcome missing at responding row " + std::to_string(i));
    const double w = 1.0 / fitted[i];
    tally.add(w);
    total += w * y;
  }
  report.value = total / static_cast<double>(n);
  report.weights_summary = tally.summary();
  if (data.count_ones() == 0)
    report.warnings.push_back("no responding units; the weighted sum is empty");
  return report;
}

/// P_n{T Y / pi} - P_n{(1 - T) Y / (1 - pi)}.
inline EstimateReport estimate_ate_ipw(const Dataset& data, const Eigen::VectorXd& fitted,
                                       Variant variant = Variant::O) {
  detail::check_ate_inputs(data, fitted);
  require(!uses_correction(variant), "estimate_ate_ipw takes variant O or P");
  const Eigen::VectorXd& y = *data.outcome;
  detail::WeightTally tally;
  double treated = 0.0, control = 0.0;
  for (Eigen::Index i = 0; i < fitted.size(); ++i) {
    if (data.indicator[i] == 1.0) {
      const double w = 1.0 / fitted[i];
      tally.add(w);
      treated += w * y[i];
    } else {
      const double w = 1.0 / (1.0 - fitted[i]);
      tally.add(w);
      control += w * y[i];
    }
  }
  const double n = static_cast<double>(fitted.size());
  EstimateReport report;
  report.estimand = Estimand::ate;
  report.variant = variant;
  report.value = treated / n - control / n;
  report.weights_summary = tally.summary();
  return report;
}

struct CorrectionConstants {
  double c1 = 0.0;
  double c0 = 0.0;
};

/// C1 = P_n{(T - pi)/pi} / P_n{((T - pi)/pi)^2},
/// C0 = -P_n{(T - pi)/(1 - pi)} / P_n{((T - pi)/(1 - pi))^2}.
inline CorrectionConstants ld_correction_constants(const Eigen::VectorXd& indicator,
                                                   const Eigen::VectorXd& fitted) {
  require(indicator.size() == fitted.size(), "indicator/fitted length mismatch");
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (Eigen::Index i = 0; i < fitted.size(); ++i) {
    const double pi = fitted[i];
    if (!(pi > 0.0 && pi < 1.0))
      throw EstimationError("fitted propensity outside (0, 1) at row " + std::to_string(i));
    const double r1 = (indicator[i] - pi) / pi;
    const double r0 = (indicator[i] - pi) / (1.0 - pi);
    num1 += r1;
    den1 += r1 * r1;
    num0 += r0;
    den0 += r0 * r0;
  }
  if (den1 == 0.0 || den0 == 0.0)
    throw EstimationError("correction constants undefined: all propensity residuals are zero");
  // The 1/n factors cancel in each ratio.
  return {num1 / den1, -num0 / den0};
}

/// Ratio-form IPW difference with each arm's weights multiplied by (1 - C/pi).
inline EstimateReport estimate_ate_ld(const Dataset& data, const Eigen::VectorXd& fitted,
                                      Variant variant = Variant::LD) {
  detail::check_ate_inputs(data, fitted);
  require(uses_correction(variant), "estimate_ate_ld takes variant LD or PLD");
  const auto [c1, c0] = ld_correction_constants(data.indicator, fitted);
  const Eigen::VectorXd& y = *data.outcome;
  detail::WeightTally tally;
  double w1 = 0.0, wy1 = 0.0, w0 = 0.0, wy0 = 0.0;
  for (Eigen::Index i = 0; i < fitted.size(); ++i) {
    const double pi = fitted[i];
    if (data.indicator[i] == 1.0) {
      const double w = (1.0 / pi) * (1.0 - c1 / pi);
      tally.add(1.0 / pi);
      w1 += w;
      wy1 += w * y[i];
    } else {
      const double w = (1.0 / (1.0 - pi)) * (1.0 - c0 / (1.0 - pi));
      tally.add(1.0 / (1.0 - pi));
      w0 += w;
      wy0 += w * y[i];
    }
  }
  if (w1 == 0.0 || w0 == 0.0)
    throw EstimationError("corrected weights sum to zero in one arm");
  EstimateReport report;
  report.estimand = Estimand::ate;
  report.variant = variant;
  report.value = wy1 / w1 - wy0 / w0;
  report.weights_summary = tally.summary();
  report.c1 = c1;
  report.c0 = c0;
  return report;
}

}  // namespace spps
