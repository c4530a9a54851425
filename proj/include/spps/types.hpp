#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spps/errors.hpp"

namespace spps {

// missing_data: indicator is a response flag A and delta is pinned to 0.
// treatment: indicator is a treatment flag T; both bounds are free.
enum class Mode { missing_data, treatment };

inline std::string_view to_string(Mode mode) {
  return mode == Mode::missing_data ? "missing" : "treatment";
}

inline Mode parse_mode(std::string_view name) {
  if (name == "missing" || name == "missing_data") return Mode::missing_data;
  if (name == "treatment") return Mode::treatment;
  throw InputError("unknown mode '" + std::string(name) + "' (expected missing or treatment)");
}

/// Parameters (epsilon, delta, beta) of pi(x) = epsilon + (1 - delta - epsilon) * phi(beta'x).
struct Theta {
  double epsilon = 0.0;
  double delta = 0.0;
  Eigen::VectorXd beta;
  Mode mode = Mode::treatment;

  Theta() = default;
  Theta(double eps, double del, Eigen::VectorXd b, Mode m = Mode::treatment)
      : epsilon(eps), delta(del), beta(std::move(b)), mode(m) {}

  static Theta plain(Eigen::VectorXd b, Mode m = Mode::treatment) {
    return Theta(0.0, 0.0, std::move(b), m);
  }

  double scale() const { return 1.0 - delta - epsilon; }

  void validate() const {
    require(std::isfinite(epsilon) && epsilon >= 0.0 && epsilon < 1.0,
            "epsilon must lie in [0, 1)");
    require(std::isfinite(delta) && delta >= 0.0 && delta < 1.0, "delta must lie in [0, 1)");
    require(epsilon + delta < 1.0, "epsilon + delta must be < 1");
    require(mode == Mode::treatment || delta == 0.0, "missing-data mode requires delta == 0");
    require(beta.allFinite(), "beta must be finite");
  }
};

/// Design matrix (first column is the intercept), binary indicator, optional outcome.
/// Absent outcome entries are stored as NaN.
struct Dataset {
  Eigen::MatrixXd design;
  Eigen::VectorXd indicator;
  std::optional<Eigen::VectorXd> outcome;
  std::vector<std::string> covariate_names;  // excludes the intercept

  Eigen::Index rows() const { return design.rows(); }
  Eigen::Index cols() const { return design.cols(); }

  Eigen::Index count_ones() const {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < indicator.size(); ++i) k += indicator[i] == 1.0;
    return k;
  }

  // Structural checks only; rank is diagnosed separately.
  void validate() const {
    const auto n = design.rows();
    require(n > 0 && design.cols() > 0, "dataset is empty");
    require(indicator.size() == n, "indicator length does not match design rows");
    require(design.allFinite(), "design matrix contains non-finite values");
    for (Eigen::Index i = 0; i < n; ++i) {
      require(design(i, 0) == 1.0, "first design column must be the intercept");
      require(indicator[i] == 0.0 || indicator[i] == 1.0, "indicator entries must be 0 or 1");
    }
    if (outcome) require(outcome->size() == n, "outcome length does not match design rows");
  }

  Dataset subset(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.design.resize(m, design.cols());
    out.indicator.resize(m);
    if (outcome) out.outcome = Eigen::VectorXd(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = rows[static_cast<std::size_t>(r)];
      out.design.row(r) = design.row(i);
      out.indicator[r] = indicator[i];
      if (outcome) (*out.outcome)[r] = (*outcome)[i];
    }
    out.covariate_names = covariate_names;
    return out;
  }
};

}  // namespace spps
