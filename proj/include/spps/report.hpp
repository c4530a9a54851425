#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "spps/bootstrap.hpp"
#include "spps/csv.hpp"
#include "spps/estimators.hpp"
#include "spps/simulation.hpp"
#include "spps/spps_fit.hpp"
#include "spps/types.hpp"

namespace spps {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

template <typename T>
Json optional_number(const std::optional<T>& x) {
  return x ? number(static_cast<double>(*x)) : Json(nullptr);
}

inline Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

}  // namespace detail

inline Json to_json(const Theta& theta, const std::vector<std::string>& covariate_names = {}) {
  Json beta = Json::object();
  for (Eigen::Index j = 0; j < theta.beta.size(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    const std::string name = j == 0 ? "(intercept)"
                             : k - 1 < covariate_names.size() ? covariate_names[k - 1]
                                                              : "b" + std::to_string(j);
    beta[name] = detail::number(theta.beta[j]);
  }
  return Json{{"mode", std::string(to_string(theta.mode))},
              {"epsilon", detail::number(theta.epsilon)},
              {"delta", detail::number(theta.delta)},
              {"beta", beta}};
}

inline Json to_json(const Diagnostics& d) {
  return Json{{"rank", d.rank},
              {"columns", d.columns},
              {"full_rank", d.full_rank},
              {"condition_number", detail::number(d.condition_number)},
              {"index_min", detail::optional_number(d.index_min)},
              {"index_max", detail::optional_number(d.index_max)},
              {"warnings", d.warnings}};
}

inline Json to_json(const FitResult& fit, const std::vector<std::string>& covariate_names = {}) {
  Json trace = Json::array();
  for (const auto& t : fit.trace)
    trace.push_back(Json{{"iteration", t.iteration}, {"loglik", detail::number(t.loglik)}});
  return Json{{"theta_hat", to_json(fit.theta_hat, covariate_names)},
              {"loglik", detail::number(fit.loglik)},
              {"plain_loglik", detail::number(fit.plain_loglik)},
              {"outer_iterations", fit.outer_iterations},
              {"converged", fit.converged},
              {"guard_triggered", fit.guard_triggered},
              {"fallback_plain_glm", fit.fallback_plain_glm},
              {"epsilon_at_boundary", fit.epsilon_at_boundary},
              {"delta_at_boundary", fit.delta_at_boundary},
              {"trace", trace},
              {"assumption_diagnostics", to_json(fit.assumption_diagnostics)}};
}

inline Json to_json(const BootstrapSummary& b) {
  return Json{{"se", detail::number(b.se)},
              {"ci_low", detail::number(b.ci_low)},
              {"ci_high", detail::number(b.ci_high)},
              {"n_boot_effective", b.n_boot_effective},
              {"n_fail", b.n_fail}};
}

inline Json to_json(const EstimateReport& r) {
  Json j{{"estimand", std::string(to_string(r.estimand))},
         {"variant", std::string(to_string(r.variant))},
         {"value", detail::number(r.value)},
         {"weights_summary",
          Json{{"min", detail::number(r.weights_summary.min)},
               {"max", detail::number(r.weights_summary.max)},
               {"sum", detail::number(r.weights_summary.sum)}}},
         {"c0", detail::optional_number(r.c0)},
         {"c1", detail::optional_number(r.c1)},
         {"warnings", r.warnings}};
  if (r.bootstrap) j["bootstrap"] = to_json(*r.bootstrap);
  return j;
}

/// Flat bootstrap report: estimate, se, ci_low, ci_high, n_boot_effective, n_fail.
inline Json bootstrap_report_json(const EstimateReport& r) {
  const BootstrapSummary b = r.bootstrap.value_or(BootstrapSummary{});
  return Json{{"variant", std::string(to_string(r.variant))},
              {"estimate", detail::number(r.value)},
              {"se", detail::number(b.se)},
              {"ci_low", detail::number(b.ci_low)},
              {"ci_high", detail::number(b.ci_high)},
              {"n_boot_effective", b.n_boot_effective},
              {"n_fail", b.n_fail}};
}

inline Json to_json(const MseTable& table) {
  Json cells = Json::array();
  for (const auto& c : table.cells) {
    Json row{{"delta0", c.delta0}, {"epsilon0", c.epsilon0}, {"nrep", c.nrep}};
    for (std::size_t k = 0; k < kAllVariants.size(); ++k) {
      row[std::string(to_string(kAllVariants[k]))] =
          Json{{"mse", detail::number(c.mse[k])},
               {"mc_se", detail::number(c.mc_se[k])},
               {"n_fail", c.n_fail[k]}};
    }
    cells.push_back(row);
  }
  return Json{{"cells", cells}};
}

/// One row per (cell, variant), cells in grid order.
inline std::string mse_table_csv(const MseTable& table) {
  std::ostringstream os;
  os << "delta0,epsilon0,variant,mse,mc_se,n_fail\n";
  for (const auto& c : table.cells) {
    for (std::size_t k = 0; k < kAllVariants.size(); ++k) {
      os << format_double(c.delta0) << ',' << format_double(c.epsilon0) << ','
         << to_string(kAllVariants[k]) << ',' << format_double(c.mse[k]) << ','
         << format_double(c.mc_se[k]) << ',' << c.n_fail[k] << '\n';
    }
  }
  return os.str();
}

inline Json error_json(const Error& e) {
  Json j{{"error", to_string(e.kind())}, {"message", e.what()}};
  if (const auto* nc = dynamic_cast<const NonConvergence*>(&e)) {
    j["iterations"] = nc->iterations();
    j["last_iterate"] = detail::vector_json(nc->last_iterate());
  }
  if (const auto* bu = dynamic_cast<const BootstrapUnreliable*>(&e))
    j["partial"] = to_json(bu->partial().summary);
  return j;
}

}  // namespace spps
