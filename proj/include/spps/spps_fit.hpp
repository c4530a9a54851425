#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spps/errors.hpp"
#include "spps/glm_fit.hpp"
#include "spps/link.hpp"
#include "spps/model.hpp"
#include "spps/types.hpp"

namespace spps {

/// Identifiability diagnostics. Rank is a hard requirement for fitting; the
/// linear-predictor checks are heuristics and only ever produce warnings.
struct Diagnostics {
  Eigen::Index rank = 0;
  Eigen::Index columns = 0;
  bool full_rank = false;
  double condition_number = std::numeric_limits<double>::infinity();
  std::optional<double> index_min;
  std::optional<double> index_max;
  std::vector<std::string> warnings;
};

struct TracePoint {
  int iteration = 0;
  double loglik = 0.0;
};

struct FitOptions {
  SolverControls controls;
  int max_outer_iters = 200;
  double outer_tol = 1e-8;
  double guard_threshold = 0.6;
  // Starting point for the coordinate-ascent loop; skips the initial
  // bound estimates and the guard.
  std::optional<Theta> warm_start;
};

struct FitResult {
  Theta theta_hat;
  Eigen::VectorXd fitted;
  std::vector<TracePoint> trace;
  double loglik = 0.0;
  double plain_loglik = 0.0;
  Eigen::VectorXd plain_beta;
  int outer_iterations = 0;
  bool guard_triggered = false;
  bool fallback_plain_glm = false;
  bool converged = false;
  bool epsilon_at_boundary = false;
  bool delta_at_boundary = false;
  Diagnostics assumption_diagnostics;
};

namespace detail {

// The bounds are only identified when the linear predictor has unbounded support,
// which fails when no covariate has more than two distinct levels.
inline bool has_continuous_covariate(const Eigen::MatrixXd& design) {
  for (Eigen::Index j = 1; j < design.cols(); ++j) {
    std::set<double> levels;
    for (Eigen::Index i = 0; i < design.rows() && levels.size() <= 2; ++i)
      levels.insert(design(i, j));
    if (levels.size() > 2) return true;
  }
  return false;
}

inline Diagnostics design_diagnostics(const Eigen::MatrixXd& design) {
  Diagnostics d;
  d.columns = design.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  d.rank = qr.rank();
  d.full_rank = d.rank == design.cols();
  // X and the R factor of its QR decomposition share singular values.
  const Eigen::MatrixXd r =
      qr.matrixR().topLeftCorner(std::min(design.rows(), design.cols()), design.cols())
          .template triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
  const auto& sv = svd.singularValues();
  if (sv.size() > 0 && sv[sv.size() - 1] > 0.0) d.condition_number = sv[0] / sv[sv.size() - 1];
  if (!d.full_rank)
    d.warnings.push_back("design rank " + std::to_string(d.rank) + " < " +
                         std::to_string(d.columns) +
                         " columns: covariates are concentrated on a hyperplane");
  return d;
}

inline void add_index_diagnostics(Diagnostics& d, const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& beta) {
  constexpr double kNarrowRange = 2.0;
  const Eigen::VectorXd index = design * beta;
  d.index_min = index.minCoeff();
  d.index_max = index.maxCoeff();
  if (*d.index_max - *d.index_min < kNarrowRange)
    d.warnings.push_back("fitted linear predictor spans less than 2 units; unbounded support "
                         "of the index cannot be supported by this sample");
  if (!has_continuous_covariate(design))
    d.warnings.push_back("no covariate has more than two levels; the linear predictor has "
                         "bounded support");
}

}  // namespace detail

/// Rank/conditioning of the design plus heuristics on the plain-GLM linear predictor.
inline Diagnostics check_identifiability(const Dataset& data, const Link& link = Link::logistic(),
                                         const SolverControls& controls = {}) {
  data.validate();
  Diagnostics d = detail::design_diagnostics(data.design);
  if (!d.full_rank || data.rows() < data.cols()) return d;
  try {
    const StepResult plain = fit_plain_glm(data, link, controls);
    detail::add_index_diagnostics(d, data.design, plain.value);
  } catch (const NonConvergence& e) {
    d.warnings.push_back(std::string("plain GLM fit failed: ") + e.what());
  }
  return d;
}

/// Fits the bounded-link propensity model by coordinate ascent: plain GLM start,
/// bound initialisation from the fitted range, then alternating beta / epsilon /
/// delta maximizations until the log-likelihood stops improving.
inline FitResult fit_spps(const Dataset& data, const Link& link, Mode mode,
                          const FitOptions& options = {}) {
  const SolverControls& controls = options.controls;
  require(options.max_outer_iters > 0 && options.outer_tol > 0.0,
          "outer iteration controls must be positive");
  const double margin = controls.bound_margin;
  const bool treatment = mode == Mode::treatment;

  // Plain GLM. Input errors and separation propagate to the caller.
  const StepResult plain = fit_plain_glm(data, link, controls);
  FitResult out;
  out.plain_beta = plain.value;
  out.plain_loglik = plain.loglik;
  out.assumption_diagnostics = detail::design_diagnostics(data.design);
  detail::add_index_diagnostics(out.assumption_diagnostics, data.design, plain.value);

  auto finish_with_plain = [&](FitResult& r) {
    r.theta_hat = Theta::plain(plain.value, mode);
    r.loglik = plain.loglik;
    r.fallback_plain_glm = true;
    r.fitted = evaluate_propensities(data, r.theta_hat, link);
  };

  Theta theta;
  if (options.warm_start) {
    theta = *options.warm_start;
    theta.validate();
    require(theta.mode == mode, "warm start mode does not match requested mode");
    check_dimensions(data, theta.beta);
  } else {
    // Starting bounds from the range of the plain fitted values.
    const Eigen::VectorXd fitted0 = data.design * plain.value;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < fitted0.size(); ++i) {
      lo = std::min(lo, link.cdf(fitted0[i]));
      hi = std::max(hi, link.cdf(fitted0[i]));
    }
    double eps1 = lo;
    double del1 = treatment ? 1.0 - hi : 0.0;
    if (lo == hi) {
      eps1 = margin;
      del1 = treatment ? margin : 0.0;
    }
    // Guard: keep the plain GLM when its fitted range is already narrow.
    if (treatment && eps1 + del1 > options.guard_threshold) {
      out.guard_triggered = true;
      out.converged = plain.converged;
      finish_with_plain(out);
      out.trace.push_back({0, out.loglik});
      return out;
    }
    eps1 = std::max(eps1, margin);
    del1 = treatment ? std::max(del1, margin) : 0.0;
    eps1 = std::min(eps1, 1.0 - del1 - 2.0 * margin);
    theta = Theta(eps1, del1, plain.value, mode);
  }

  double ll = log_likelihood(data, theta, link);
  out.trace.push_back({0, ll});
  double accepted_eps = 0.0, accepted_del = 0.0;  // last bounds with a successful beta fit
  bool converged = false;

  int iter = 1;
  for (; iter <= options.max_outer_iters; ++iter) {
    const double ll_prev = ll;

    // Beta update, with one halved retry toward the last accepted bounds.
    StepResult beta_fit;
    try {
      beta_fit = detail::newton_beta(data, link, theta.epsilon, theta.delta, theta.beta, controls);
    } catch (const NonConvergence&) {
      const double eps_retry = 0.5 * (theta.epsilon + accepted_eps);
      const double del_retry = 0.5 * (theta.delta + accepted_del);
      try {
        beta_fit = detail::newton_beta(data, link, eps_retry, del_retry, theta.beta, controls);
        if (beta_fit.loglik < ll_prev) break;
        theta.epsilon = eps_retry;
        theta.delta = del_retry;
      } catch (const NonConvergence&) {
        break;
      }
    }
    theta.beta = beta_fit.value;
    accepted_eps = theta.epsilon;
    accepted_del = theta.delta;
    ll = beta_fit.loglik;

    // Epsilon update
    const StepResult eps_fit =
        detail::bound_step_unchecked(data, link, theta.beta, theta.delta, true, controls);
    if (eps_fit.loglik >= ll) {
      theta.epsilon = eps_fit.scalar();
      ll = eps_fit.loglik;
      out.epsilon_at_boundary = eps_fit.at_boundary;
    }

    // Delta update (treatment only)
    if (treatment) {
      const StepResult del_fit =
          detail::bound_step_unchecked(data, link, theta.beta, theta.epsilon, false, controls);
      if (del_fit.loglik >= ll) {
        theta.delta = del_fit.scalar();
        ll = del_fit.loglik;
        out.delta_at_boundary = del_fit.at_boundary;
      }
    }

    out.trace.push_back({iter, ll});
    if (ll - ll_prev < options.outer_tol) {
      converged = true;
      break;
    }
  }
  out.outer_iterations = std::min(iter, options.max_outer_iters);
  out.converged = converged;

  // The plain GLM is the epsilon = delta = 0 edge of the parameter space; keep
  // it when the interior search ends below it.
  if (ll < plain.loglik) {
    finish_with_plain(out);
    out.trace.push_back({out.outer_iterations, out.loglik});
    return out;
  }
  out.theta_hat = theta;
  out.loglik = ll;
  out.fitted = evaluate_propensities(data, theta, link);
  return out;
}

}  // namespace spps
