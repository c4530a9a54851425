#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "spps/errors.hpp"
#include "spps/link.hpp"
#include "spps/model.hpp"
#include "spps/types.hpp"

namespace spps {

struct SolverControls {
  int max_newton_iters = 50;
  double newton_tol = 1e-8;       // max-norm of the beta gradient
  int max_step_halvings = 30;
  double bound_margin = 1e-6;     // distance kept from the (epsilon, delta) boundary
  double scalar_opt_tol = 1e-9;   // final bracket width of the 1-D searches
  double beta_norm_cap = 1e3;     // iterates beyond this are treated as divergent
  int max_scalar_iters = 200;

  void validate() const {
    require(max_newton_iters > 0 && max_step_halvings > 0 && max_scalar_iters > 0,
            "solver iteration limits must be positive");
    require(newton_tol > 0.0 && scalar_opt_tol > 0.0 && beta_norm_cap > 0.0,
            "solver tolerances must be positive");
    require(bound_margin > 0.0 && bound_margin < 0.5, "bound_margin must lie in (0, 0.5)");
  }
};

/// Outcome of one coordinate block update. Scalar steps store a length-1 value.
struct StepResult {
  Eigen::VectorXd value;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool at_boundary = false;

  double scalar() const { return value[0]; }
};

inline bool design_has_full_rank(const Eigen::MatrixXd& design) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  return qr.rank() == design.cols();
}

namespace detail {

struct BetaObjective {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd observed_info;  // minus the Hessian
  Eigen::VectorXd fisher_weights;
};

inline BetaObjective beta_objective(const Dataset& data, const Link& link, double epsilon,
                                    double delta, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd index = data.design * beta;
  const Eigen::Index n = index.size();
  const double s = 1.0 - delta - epsilon;
  Eigen::VectorXd grad_w(n), obs_w(n), fisher_w(n);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Link::Point lp = link.evaluate(index[i]);
    const double prob = clamp_probability(epsilon + s * lp.cdf);
    const double prob_c = clamp_probability(delta + s * lp.cdf_complement);
    const double dpi = s * lp.pdf;
    const double d2pi = s * lp.pdf_derivative;
    double dl, d2l;
    if (data.indicator[i] == 1.0) {
      ll += std::log(prob);
      dl = 1.0 / prob;
      d2l = -1.0 / (prob * prob);
    } else {
      ll += std::log(prob_c);
      dl = -1.0 / prob_c;
      d2l = -1.0 / (prob_c * prob_c);
    }
    grad_w[i] = dl * dpi;
    obs_w[i] = -(d2l * dpi * dpi + dl * d2pi);
    fisher_w[i] = dpi * dpi / (prob * prob_c);
  }
  BetaObjective out;
  out.loglik = ll;
  out.gradient = data.design.transpose() * grad_w;
  out.observed_info = data.design.transpose() * obs_w.asDiagonal() * data.design;
  out.fisher_weights = std::move(fisher_w);
  return out;
}

inline double rounding_slack(double loglik) {
  return 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(loglik));
}

// Ascent direction: Newton when the observed information is positive definite,
// Fisher scoring otherwise.
inline Eigen::VectorXd ascent_direction(const Dataset& data, const BetaObjective& obj) {
  Eigen::LLT<Eigen::MatrixXd> newton(obj.observed_info);
  if (newton.info() == Eigen::Success) {
    Eigen::VectorXd d = newton.solve(obj.gradient);
    if (d.allFinite() && d.dot(obj.gradient) > 0.0) return d;
  }
  const Eigen::MatrixXd fisher_info =
      data.design.transpose() * obj.fisher_weights.asDiagonal() * data.design;
  Eigen::LDLT<Eigen::MatrixXd> scoring(fisher_info);
  Eigen::VectorXd d = scoring.solve(obj.gradient);
  if (scoring.info() == Eigen::Success && d.allFinite() && d.dot(obj.gradient) > 0.0) return d;
  return obj.gradient;
}

inline StepResult newton_beta(const Dataset& data, const Link& link, double epsilon, double delta,
                              Eigen::VectorXd beta, const SolverControls& controls) {
  // A direction this long with a vanishing gradient means the likelihood keeps
  // rising along a flat ray (separation) rather than sitting at an optimum.
  constexpr double kSaturatedStep = 1e-2;

  const Eigen::VectorXd start = beta;
  BetaObjective obj = beta_objective(data, link, epsilon, delta, beta);
  const double start_loglik = obj.loglik;
  StepResult result;
  int iter = 0;
  for (; iter < controls.max_newton_iters; ++iter) {
    const Eigen::VectorXd dir = ascent_direction(data, obj);
    if (obj.gradient.lpNorm<Eigen::Infinity>() <= controls.newton_tol) {
      if (dir.lpNorm<Eigen::Infinity>() > kSaturatedStep)
        throw NonConvergence("likelihood increases without bound along a flat direction "
                             "(complete or quasi-complete separation)",
                             beta, iter);
      result.converged = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= controls.max_step_halvings; ++h, step *= 0.5) {
      Eigen::VectorXd candidate = beta + step * dir;
      if (!candidate.allFinite()) continue;
      BetaObjective cand_obj = beta_objective(data, link, epsilon, delta, candidate);
      // Near the optimum the loglik change drops below rounding; there the
      // gradient decides.
      const bool within_rounding = cand_obj.loglik >= obj.loglik - rounding_slack(obj.loglik) &&
                                   cand_obj.gradient.lpNorm<Eigen::Infinity>() <
                                       obj.gradient.lpNorm<Eigen::Infinity>();
      if (cand_obj.loglik >= obj.loglik || within_rounding) {
        beta = std::move(candidate);
        obj = std::move(cand_obj);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // stalled at working precision
    if (beta.lpNorm<Eigen::Infinity>() > controls.beta_norm_cap)
      throw NonConvergence("beta iterate exceeded norm cap " +
                               std::to_string(controls.beta_norm_cap) + " (separation)",
                           beta, iter + 1);
  }
  if (!result.converged && iter == controls.max_newton_iters &&
      obj.gradient.lpNorm<Eigen::Infinity>() <= controls.newton_tol)
    result.converged = true;
  if (obj.loglik < start_loglik) {
    // rounding-level drift; never return below the warm start
    beta = start;
    obj.loglik = start_loglik;
  }
  result.value = std::move(beta);
  result.loglik = obj.loglik;
  result.iterations = iter;
  return result;
}

inline void check_fit_inputs(const Dataset& data, const SolverControls& controls) {
  data.validate();
  controls.validate();
  require(data.rows() >= data.cols(), "need at least as many rows as design columns");
  if (!design_has_full_rank(data.design))
    throw InputError("design matrix is rank deficient (covariates concentrated on a hyperplane)");
}

}  // namespace detail

/// Ordinary GLM fit (epsilon = delta = 0) by damped Newton iterations from beta = 0.
inline StepResult fit_plain_glm(const Dataset& data, const Link& link,
                                const SolverControls& controls = {}) {
  detail::check_fit_inputs(data, controls);
  return detail::newton_beta(data, link, 0.0, 0.0, Eigen::VectorXd::Zero(data.cols()), controls);
}

/// Maximizes the bounded-link likelihood over beta with (epsilon, delta) held fixed.
inline StepResult beta_step(const Dataset& data, const Link& link, double epsilon, double delta,
                            const Eigen::VectorXd& beta_init, const SolverControls& controls = {}) {
  detail::check_fit_inputs(data, controls);
  require(epsilon >= 0.0 && delta >= 0.0 && epsilon + delta < 1.0,
          "beta_step needs epsilon, delta >= 0 with epsilon + delta < 1");
  check_dimensions(data, beta_init);
  return detail::newton_beta(data, link, epsilon, delta, beta_init, controls);
}

/// Maximizes a concave function on [lo, hi] given a callback returning
/// (f', f''). Newton steps are taken inside a sign-bracket of f' and replaced by
/// bisection whenever they leave it, so progress is guaranteed even where f is
/// nearly flat. Stops once the step or bracket is narrower than tol.
template <typename Derivatives>
double maximize_concave(Derivatives&& derivs, double lo, double hi, double tol, int max_iter,
                        int* iterations) {
  int iter = 0;
  auto finish = [&](double x) {
    if (iterations) *iterations = iter;
    return x;
  };
  const auto [g_lo, h_lo] = derivs(lo);
  ++iter;
  if (g_lo <= 0.0) return finish(lo);
  const auto [g_hi, h_hi] = derivs(hi);
  ++iter;
  if (g_hi >= 0.0) return finish(hi);
  double a = lo, b = hi;  // f'(a) > 0 > f'(b)
  double x = 0.5 * (a + b);
  while (iter < max_iter) {
    const auto [g, h] = derivs(x);
    ++iter;
    if (g == 0.0) break;
    if (g > 0.0) a = x; else b = x;
    double next = h < 0.0 ? x - g / h : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    const double moved = std::abs(next - x);
    x = next;
    if (moved < 0.5 * tol || b - a < tol) break;
  }
  return finish(x);
}

namespace detail {

// Maximizes over one bound coordinate; `other` is the coordinate held fixed.
inline StepResult bound_step_unchecked(const Dataset& data, const Link& link,
                                       const Eigen::VectorXd& beta, double other,
                                       bool for_epsilon, const SolverControls& controls) {
  const double m = controls.bound_margin;
  require(other >= 0.0 && other < 1.0, "fixed bound coordinate must lie in [0, 1)");
  const double lo = m;
  const double hi = 1.0 - other - m;
  if (!(hi > lo))
    throw InputError("empty search interval: fixed bound " + std::to_string(other) +
                     " leaves no room for the free bound");
  const LinkValues values = link_values(data, beta, link);
  auto objective = [&](double t) {
    return for_epsilon ? loglik_from_link_values(values, t, other)
                       : loglik_from_link_values(values, other, t);
  };
  // pi = eps + s * phi and 1 - pi = delta + s * (1 - phi) are affine in the free
  // bound, so the objective is concave.
  auto derivatives = [&](double t) {
    const double eps = for_epsilon ? t : other;
    const double del = for_epsilon ? other : t;
    const double s = 1.0 - eps - del;
    const Eigen::ArrayXd prob = clamped(eps + s * values.ones_cdf);
    const Eigen::ArrayXd prob_c = clamped(del + s * values.zeros_ccdf);
    // d pi / d t for treated rows, d (1 - pi) / d t for the rest
    const Eigen::ArrayXd& dp1 = for_epsilon ? values.ones_ccdf : values.ones_cdf;
    const Eigen::ArrayXd& dp0 = for_epsilon ? values.zeros_ccdf : values.zeros_cdf;
    const double sign = for_epsilon ? 1.0 : -1.0;
    const Eigen::ArrayXd r1 = dp1 / prob;
    const Eigen::ArrayXd r0 = dp0 / prob_c;
    return std::pair<double, double>{sign * (r1.sum() - r0.sum()),
                                     -(r1.square().sum() + r0.square().sum())};
  };
  StepResult result;
  double best = maximize_concave(derivatives, lo, hi, controls.scalar_opt_tol,
                                 controls.max_scalar_iters, &result.iterations);
  double best_ll = objective(best);
  for (double end : {lo, hi}) {
    const double ll = objective(end);
    if (ll >= best_ll) {
      best = end;
      best_ll = ll;
    }
  }
  result.value = Eigen::VectorXd::Constant(1, best);
  result.loglik = best_ll;
  result.converged = true;
  result.at_boundary = best - lo <= controls.scalar_opt_tol || hi - best <= controls.scalar_opt_tol;
  return result;
}

inline StepResult bound_step(const Dataset& data, const Link& link, const Eigen::VectorXd& beta,
                             double other, bool for_epsilon, const SolverControls& controls) {
  data.validate();
  controls.validate();
  return bound_step_unchecked(data, link, beta, other, for_epsilon, controls);
}

}  // namespace detail

/// Lower-bound update: argmax over epsilon in [m, 1 - delta - m] with beta, delta fixed.
inline StepResult epsilon_step(const Dataset& data, const Link& link, const Eigen::VectorXd& beta,
                               double delta, const SolverControls& controls = {}) {
  return detail::bound_step(data, link, beta, delta, true, controls);
}

/// Upper-bound update: argmax over delta in [m, 1 - epsilon - m] with beta, epsilon fixed.
inline StepResult delta_step(const Dataset& data, const Link& link, const Eigen::VectorXd& beta,
                             double epsilon, const SolverControls& controls = {}) {
  return detail::bound_step(data, link, beta, epsilon, false, controls);
}

}  // namespace spps
