#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spps/errors.hpp"
#include "spps/estimators.hpp"
#include "spps/link.hpp"
#include "spps/parallel.hpp"
#include "spps/pipeline.hpp"
#include "spps/rng.hpp"
#include "spps/spps_fit.hpp"
#include "spps/types.hpp"

namespace spps {

// as_printed: pi = eps + (1 - delta - eps) / (1 + exp(+b'x)), the generator's
// original form. standard: the logistic CDF convention 1 / (1 + exp(-b'x)).
enum class PropensitySign { as_printed, standard };

/// Data-generating process for the ATE experiment: confounders X1..X3,
/// outcome-only covariates V1..V3, bounded-logistic treatment, linear outcome.
struct SimulationConfig {
  double epsilon0 = 0.0;
  double delta0 = 0.0;
  Eigen::VectorXd beta0 = (Eigen::VectorXd(7) << 0.0, 0.6, -0.6, 0.6, 0.0, 0.0, 0.0).finished();
  std::array<double, 5> nu{0.0, -1.0, 1.0, -1.0, 2.0};  // intercept, X1, X2, X3, T
  std::array<double, 3> xi{-1.0, 1.0, 1.0};             // V1, V2, V3
  // Means of (X1, V1, X2, V2) given X3 = 0 and X3 = 1.
  Eigen::Vector4d rho0{1.0, 1.0, -1.0, -1.0};
  Eigen::Vector4d rho1{-1.0, -1.0, 1.0, 1.0};
  Eigen::Matrix4d sigma = default_sigma();
  double x3_prob = 0.2;
  std::array<double, 2> v3_given_x3{0.75, 0.25};  // P(V3 = 1 | X3 = 1), P(V3 = 1 | X3 = 0)
  int n = 1000;
  int nrep = 1000;
  std::uint64_t seed = 20240601;
  double tau_true = 2.0;
  PropensitySign sign = PropensitySign::as_printed;

  static Eigen::Matrix4d default_sigma() {
    Eigen::Matrix4d s;
    s << 1.0, 0.5, -0.5, -0.5,
         0.5, 1.0, -0.5, -0.5,
        -0.5, -0.5, 1.0, 0.5,
        -0.5, -0.5, 0.5, 1.0;
    return s;
  }

  void validate() const {
    require(epsilon0 >= 0.0 && delta0 >= 0.0 && epsilon0 + delta0 < 1.0,
            "simulation bounds need epsilon0, delta0 >= 0 and epsilon0 + delta0 < 1");
    require(beta0.size() == 7, "beta0 must have 7 entries (intercept + 6 covariates)");
    require(n > 0 && nrep > 0, "n and nrep must be positive");
    require(x3_prob >= 0.0 && x3_prob <= 1.0, "x3_prob must be a probability");
    require(sigma.isApprox(sigma.transpose()), "sigma must be symmetric");
    require(Eigen::LLT<Eigen::Matrix4d>(sigma).info() == Eigen::Success,
            "sigma must be positive definite");
  }
};

struct SimulatedSample {
  Dataset data;               // design columns (1, X1, X2, X3, V1, V2, V3)
  Eigen::VectorXd propensity;  // true P(T = 1 | X)
};

inline double simulation_propensity(const SimulationConfig& cfg, double index) {
  const double sign = cfg.sign == PropensitySign::as_printed ? 1.0 : -1.0;
  const double z = sign * index;
  // 1 / (1 + exp(z)) evaluated without overflow
  const double inner = z > 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  return cfg.epsilon0 + (1.0 - cfg.delta0 - cfg.epsilon0) * inner;
}

/// Draws one sample of size cfg.n. Per row the draw order is X3, V3, four
/// normals for (X1, V1, X2, V2), T, Z.
inline SimulatedSample generate_sample(const SimulationConfig& cfg, Rng& rng) {
  cfg.validate();
  const Eigen::Matrix4d chol = cfg.sigma.llt().matrixL();
  const Eigen::Index n = cfg.n;
  SimulatedSample s;
  s.data.design.resize(n, 7);
  s.data.indicator.resize(n);
  s.data.outcome = Eigen::VectorXd(n);
  s.data.covariate_names = {"x1", "x2", "x3", "v1", "v2", "v3"};
  s.propensity.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x3 = rng.bernoulli(cfg.x3_prob) ? 1.0 : 0.0;
    const double v3 = rng.bernoulli(x3 == 1.0 ? cfg.v3_given_x3[0] : cfg.v3_given_x3[1]) ? 1.0 : 0.0;
    Eigen::Vector4d z;
    for (int k = 0; k < 4; ++k) z[k] = rng.normal();
    const Eigen::Vector4d mvn = (x3 == 1.0 ? cfg.rho1 : cfg.rho0) + chol * z;
    const double x1 = mvn[0], v1 = mvn[1], x2 = mvn[2], v2 = mvn[3];
    s.data.design.row(i) << 1.0, x1, x2, x3, v1, v2, v3;
    const double index = s.data.design.row(i).dot(cfg.beta0);
    const double pi = simulation_propensity(cfg, index);
    const double t = rng.bernoulli(pi) ? 1.0 : 0.0;
    const double noise = rng.normal();
    s.propensity[i] = pi;
    s.data.indicator[i] = t;
    (*s.data.outcome)[i] = cfg.nu[0] + cfg.nu[1] * x1 + cfg.nu[2] * x2 + cfg.nu[3] * x3 +
                           cfg.nu[4] * t + cfg.xi[0] * v1 + cfg.xi[1] * v2 + cfg.xi[2] * v3 +
                           noise;
  }
  return s;
}

/// Replicate `rep` of a configuration always uses substream (cfg.seed, rep).
inline SimulatedSample generate_replicate(const SimulationConfig& cfg, std::uint64_t rep) {
  Rng rng(cfg.seed, rep);
  return generate_sample(cfg, rng);
}

inline constexpr std::array<Variant, 4> kAllVariants{Variant::O, Variant::P, Variant::LD,
                                                     Variant::PLD};

/// Estimates in kAllVariants order; nullopt marks a failed estimator.
using ReplicateEstimates = std::array<std::optional<double>, 4>;
using ReplicateEvaluator = std::function<ReplicateEstimates(const SimulatedSample&)>;

/// Fits the plain and bounded models once each and evaluates all four ATE estimators.
inline ReplicateEstimates evaluate_four_estimators(const Dataset& data, const Link& link,
                                                   const FitOptions& fit) {
  ReplicateEstimates out;
  std::optional<Eigen::VectorXd> plain_fitted, bounded_fitted;
  try {
    // The bounded fit starts from the plain GLM and reports it.
    const FitResult fit_result = fit_spps(data, link, Mode::treatment, fit);
    plain_fitted = evaluate_propensities(data, Theta::plain(fit_result.plain_beta), link);
    bounded_fitted = fit_result.fitted;
  } catch (const Error&) {
  }
  for (std::size_t k = 0; k < kAllVariants.size(); ++k) {
    const Variant v = kAllVariants[k];
    const auto& fitted = uses_bounded_model(v) ? bounded_fitted : plain_fitted;
    if (!fitted) continue;
    try {
      out[k] = estimate_from_fitted(data, *fitted, Estimand::ate, v).value;
    } catch (const Error&) {
    }
  }
  return out;
}

struct CellResult {
  double epsilon0 = 0.0;
  double delta0 = 0.0;
  int nrep = 0;
  std::array<double, 4> mse{};
  std::array<double, 4> mc_se{};
  std::array<int, 4> n_fail{};
  std::vector<ReplicateEstimates> estimates;  // per replicate, kAllVariants order
};

struct MseTable {
  std::vector<CellResult> cells;
};

struct MonteCarloOptions {
  int workers = 1;
  Link link = Link::logistic();
  FitOptions fit;
  ReplicateEvaluator evaluator;  // defaults to evaluate_four_estimators
};

/// Empirical MSE = nrep^-1 sum (tau_hat - tau)^2 per variant, with Monte Carlo
/// SE = sd(squared errors) / sqrt(count). Failed replicates are excluded per variant.
inline CellResult summarize_cell(const SimulationConfig& cfg,
                                 std::vector<ReplicateEstimates> estimates) {
  CellResult cell;
  cell.epsilon0 = cfg.epsilon0;
  cell.delta0 = cfg.delta0;
  cell.nrep = static_cast<int>(estimates.size());
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> sq;
    sq.reserve(estimates.size());
    for (const auto& rep : estimates) {
      if (rep[k] && std::isfinite(*rep[k])) {
        const double e = *rep[k] - cfg.tau_true;
        sq.push_back(e * e);
      }
    }
    cell.n_fail[k] = static_cast<int>(estimates.size() - sq.size());
    if (sq.empty()) {
      cell.mse[k] = std::numeric_limits<double>::quiet_NaN();
      cell.mc_se[k] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0.0;
    for (double v : sq) sum += v;
    const double m = sum / static_cast<double>(sq.size());
    double ss = 0.0;
    for (double v : sq) ss += (v - m) * (v - m);
    cell.mse[k] = m;
    cell.mc_se[k] = sq.size() > 1
                        ? std::sqrt(ss / static_cast<double>(sq.size() - 1)) /
                              std::sqrt(static_cast<double>(sq.size()))
                        : 0.0;
  }
  cell.estimates = std::move(estimates);
  return cell;
}

inline MseTable run_monte_carlo(const std::vector<SimulationConfig>& grid,
                                const MonteCarloOptions& options = {}) {
  for (const auto& cfg : grid) cfg.validate();
  ReplicateEvaluator evaluator = options.evaluator;
  if (!evaluator) {
    evaluator = [link = options.link, fit = options.fit](const SimulatedSample& s) {
      return evaluate_four_estimators(s.data, link, fit);
    };
  }
  std::vector<std::size_t> offsets{0};
  for (const auto& cfg : grid) offsets.push_back(offsets.back() + static_cast<std::size_t>(cfg.nrep));
  std::vector<ReplicateEstimates> flat(offsets.back());
  parallel_for(flat.size(), options.workers, [&](std::size_t job) {
    const auto cell = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), job) - offsets.begin() - 1);
    const std::uint64_t rep = job - offsets[cell];
    flat[job] = evaluator(generate_replicate(grid[cell], rep));
  });
  MseTable table;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    std::vector<ReplicateEstimates> reps(flat.begin() + static_cast<std::ptrdiff_t>(offsets[c]),
                                         flat.begin() + static_cast<std::ptrdiff_t>(offsets[c + 1]));
    table.cells.push_back(summarize_cell(grid[c], std::move(reps)));
  }
  return table;
}

inline const std::vector<double>& default_bound_levels() {
  static const std::vector<double> levels{0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  return levels;
}

/// Default (delta0, epsilon0) grid, delta0-major, skipping cells with
/// epsilon0 + delta0 >= 1.
inline std::vector<SimulationConfig> default_grid(const SimulationConfig& base,
                                                  const std::vector<double>& deltas = default_bound_levels(),
                                                  const std::vector<double>& epsilons = default_bound_levels()) {
  std::vector<SimulationConfig> grid;
  for (double d : deltas) {
    for (double e : epsilons) {
      if (e + d >= 1.0) continue;
      SimulationConfig cfg = base;
      cfg.delta0 = d;
      cfg.epsilon0 = e;
      grid.push_back(cfg);
    }
  }
  return grid;
}

}  // namespace spps
