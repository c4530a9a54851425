#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "spps/link.hpp"
#include "spps/rng.hpp"
#include "spps/types.hpp"

namespace spps::testing {

// Draws n rows from the bounded-link model with standard normal covariates.
// The outcome is y = 1 + x1 + tau * a + N(0, 1).
inline Dataset draw_bounded(int n, const Eigen::VectorXd& beta, double epsilon, double delta,
                            std::uint64_t seed, Link link = Link::logistic(), double tau = 2.0) {
  Rng rng(seed, 0);
  const auto p = beta.size();
  Dataset d;
  d.design.resize(n, p);
  d.indicator.resize(n);
  d.outcome = Eigen::VectorXd(n);
  for (Eigen::Index j = 1; j < p; ++j) d.covariate_names.push_back("x" + std::to_string(j));
  for (int i = 0; i < n; ++i) {
    d.design(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) d.design(i, j) = rng.normal();
    const double u = d.design.row(i).dot(beta);
    const double pi = epsilon + (1.0 - epsilon - delta) * link.cdf(u);
    d.indicator[i] = rng.bernoulli(pi) ? 1.0 : 0.0;
    const double x1 = p > 1 ? d.design(i, 1) : 0.0;
    (*d.outcome)[i] = 1.0 + x1 + tau * d.indicator[i] + rng.normal();
  }
  return d;
}

inline Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Plain logistic log-likelihood written out term by term.
inline double logistic_loglik_oracle(const Dataset& d, const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double u = d.design.row(i).dot(beta);
    const double p = 1.0 / (1.0 + std::exp(-u));
    ll += d.indicator[i] == 1.0 ? std::log(p) : std::log(1.0 - p);
  }
  return ll;
}

// Bounded-model log-likelihood from the textbook formula, no shared code paths.
inline double bounded_loglik_oracle(const Dataset& d, const Eigen::VectorXd& beta, double eps,
                                    double del, const Link& link) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double u = d.design.row(i).dot(beta);
    const double pi = eps + (1.0 - eps - del) * link.cdf(u);
    ll += d.indicator[i] == 1.0 ? std::log(pi) : std::log(1.0 - pi);
  }
  return ll;
}

}  // namespace spps::testing
