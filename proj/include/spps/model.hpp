#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "spps/errors.hpp"
#include "spps/link.hpp"
#include "spps/types.hpp"

namespace spps {

// Log terms never see probabilities outside [floor, 1 - floor].
inline constexpr double kProbabilityFloor = 1e-12;

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

inline double propensity_from_index(double index, double epsilon, double delta, const Link& link) {
  return epsilon + (1.0 - delta - epsilon) * link.cdf(index);
}

/// epsilon + (1 - delta - epsilon) * phi(beta'x)
inline double evaluate_propensity(const Eigen::Ref<const Eigen::VectorXd>& x, const Theta& theta,
                                  const Link& link) {
  if (x.size() != theta.beta.size())
    throw InputError("covariate vector length " + std::to_string(x.size()) +
                     " does not match beta length " + std::to_string(theta.beta.size()));
  return propensity_from_index(x.dot(theta.beta), theta.epsilon, theta.delta, link);
}

inline void check_dimensions(const Dataset& data, const Eigen::VectorXd& beta) {
  if (data.cols() != beta.size())
    throw InputError("design has " + std::to_string(data.cols()) + " columns but beta has " +
                     std::to_string(beta.size()));
}

inline Eigen::VectorXd evaluate_propensities(const Dataset& data, const Theta& theta,
                                             const Link& link) {
  check_dimensions(data, theta.beta);
  const Eigen::VectorXd index = data.design * theta.beta;
  Eigen::VectorXd out(index.size());
  for (Eigen::Index i = 0; i < index.size(); ++i)
    out[i] = propensity_from_index(index[i], theta.epsilon, theta.delta, link);
  return out;
}

namespace detail {

// Link values split by indicator. Both supported links are symmetric, so the
// complement 1 - phi is computed as phi(-u) without cancellation.
struct LinkValues {
  Eigen::ArrayXd ones_cdf;     // rows with indicator 1
  Eigen::ArrayXd ones_ccdf;
  Eigen::ArrayXd zeros_cdf;    // rows with indicator 0
  Eigen::ArrayXd zeros_ccdf;
};

inline LinkValues link_values(const Dataset& data, const Eigen::VectorXd& beta, const Link& link) {
  check_dimensions(data, beta);
  const Eigen::VectorXd index = data.design * beta;
  const Eigen::Index ones = data.count_ones();
  const Eigen::Index zeros = index.size() - ones;
  LinkValues v{Eigen::ArrayXd(ones), Eigen::ArrayXd(ones), Eigen::ArrayXd(zeros),
               Eigen::ArrayXd(zeros)};
  Eigen::Index a = 0, b = 0;
  for (Eigen::Index i = 0; i < index.size(); ++i) {
    const Link::Point lp = link.evaluate(index[i]);
    if (data.indicator[i] == 1.0) {
      v.ones_cdf[a] = lp.cdf;
      v.ones_ccdf[a++] = lp.cdf_complement;
    } else {
      v.zeros_cdf[b] = lp.cdf;
      v.zeros_ccdf[b++] = lp.cdf_complement;
    }
  }
  return v;
}

inline Eigen::ArrayXd clamped(const Eigen::ArrayXd& p) {
  return p.max(kProbabilityFloor).min(1.0 - kProbabilityFloor);
}

inline double loglik_from_link_values(const LinkValues& v, double epsilon, double delta) {
  const double s = 1.0 - delta - epsilon;
  return clamped(epsilon + s * v.ones_cdf).log().sum() +
         clamped(delta + s * v.zeros_ccdf).log().sum();
}

}  // namespace detail

/// Bernoulli log-likelihood sum_i [A_i log pi_i + (1 - A_i) log(1 - pi_i)].
inline double log_likelihood(const Dataset& data, const Theta& theta, const Link& link) {
  return detail::loglik_from_link_values(detail::link_values(data, theta.beta, link),
                                         theta.epsilon, theta.delta);
}

/// Gradient of log_likelihood, ordered (epsilon, delta, beta_0, ..., beta_{p-1}).
inline Eigen::VectorXd score(const Dataset& data, const Theta& theta, const Link& link) {
  check_dimensions(data, theta.beta);
  const auto p = theta.beta.size();
  const Eigen::VectorXd index = data.design * theta.beta;
  const double s = theta.scale();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 2);
  for (Eigen::Index i = 0; i < index.size(); ++i) {
    const Link::Point lp = link.evaluate(index[i]);
    const double phi = lp.cdf;
    const double phi_c = lp.cdf_complement;
    const double prob = clamp_probability(theta.epsilon + s * phi);
    const double prob_c = clamp_probability(theta.delta + s * phi_c);
    // d loglik / d pi for this row
    const double resid = data.indicator[i] == 1.0 ? 1.0 / prob : -1.0 / prob_c;
    grad[0] += resid * phi_c;
    grad[1] -= resid * phi;
    grad.tail(p) += (resid * s * lp.pdf) * data.design.row(i).transpose();
  }
  return grad;
}

}  // namespace spps
