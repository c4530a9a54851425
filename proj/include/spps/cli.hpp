#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spps/bootstrap.hpp"
#include "spps/csv.hpp"
#include "spps/errors.hpp"
#include "spps/estimators.hpp"
#include "spps/link.hpp"
#include "spps/pipeline.hpp"
#include "spps/report.hpp"
#include "spps/simulation.hpp"
#include "spps/spps_fit.hpp"
#include "spps/types.hpp"

namespace spps {

enum class Command { fit, estimate_mean, estimate_ate, simulate, bootstrap };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::fit: return "fit";
    case Command::estimate_mean: return "estimate-mean";
    case Command::estimate_ate: return "estimate-ate";
    case Command::simulate: return "simulate";
    case Command::bootstrap: return "bootstrap";
  }
  return "?";
}

inline Command parse_command(std::string_view name) {
  for (Command c : {Command::fit, Command::estimate_mean, Command::estimate_ate,
                    Command::simulate, Command::bootstrap})
    if (to_string(c) == name) return c;
  throw InputError("unknown command '" + std::string(name) + "'");
}

inline PropensitySign parse_sign(std::string_view name) {
  if (name == "as-printed") return PropensitySign::as_printed;
  if (name == "standard") return PropensitySign::standard;
  throw InputError("unknown propensity sign '" + std::string(name) +
                   "' (expected as-printed or standard)");
}

inline std::string_view to_string(PropensitySign s) {
  return s == PropensitySign::as_printed ? "as-printed" : "standard";
}

struct RunManifest {
  Command command = Command::simulate;
  std::string input_path;
  std::string indicator_col;
  std::optional<std::string> outcome_col;
  std::vector<std::string> covariates;
  LinkKind link = LinkKind::logistic;
  std::optional<Mode> mode;  // defaults: treatment for fit/ate/bootstrap, missing for mean
  std::vector<Variant> variants;
  std::uint64_t seed = 20240601;
  int n = 1000;
  int nrep = 1000;
  int nboot = 1000;
  int workers = 1;
  PropensitySign sign = PropensitySign::as_printed;
  std::string emit_samples;  // directory; empty disables
  std::string output;        // file; empty writes to stdout
  std::string fitted_output;  // fit only: per-row propensities CSV
  FitOptions fit;
};

inline Mode effective_mode(const RunManifest& m) {
  if (m.mode) return *m.mode;
  return m.command == Command::estimate_mean ? Mode::missing_data : Mode::treatment;
}

inline std::vector<Variant> effective_variants(const RunManifest& m) {
  if (!m.variants.empty()) return m.variants;
  switch (m.command) {
    case Command::estimate_mean: return {Variant::P};
    case Command::estimate_ate: return {Variant::O, Variant::P, Variant::LD, Variant::PLD};
    default: return {Variant::O};
  }
}

inline Json to_json(const RunManifest& m) {
  const SolverControls& c = m.fit.controls;
  Json variants = Json::array();
  for (Variant v : m.variants) variants.push_back(std::string(to_string(v)));
  Json j{{"command", std::string(to_string(m.command))},
         {"input_path", m.input_path},
         {"indicator_col", m.indicator_col},
         {"outcome_col", m.outcome_col ? Json(*m.outcome_col) : Json(nullptr)},
         {"covariates", m.covariates},
         {"link", m.link == LinkKind::logistic ? "logistic" : "probit"},
         {"mode", m.mode ? Json(std::string(to_string(*m.mode))) : Json(nullptr)},
         {"variants", variants},
         {"seed", m.seed},
         {"n", m.n},
         {"nrep", m.nrep},
         {"nboot", m.nboot},
         {"workers", m.workers},
         {"sign", std::string(to_string(m.sign))},
         {"emit_samples", m.emit_samples},
         {"output", m.output},
         {"fitted_output", m.fitted_output},
         {"controls",
          Json{{"max_newton_iters", c.max_newton_iters},
               {"newton_tol", c.newton_tol},
               {"max_step_halvings", c.max_step_halvings},
               {"bound_margin", c.bound_margin},
               {"scalar_opt_tol", c.scalar_opt_tol},
               {"beta_norm_cap", c.beta_norm_cap},
               {"max_scalar_iters", c.max_scalar_iters},
               {"max_outer_iters", m.fit.max_outer_iters},
               {"outer_tol", m.fit.outer_tol},
               {"guard_threshold", m.fit.guard_threshold}}}};
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunManifest manifest_from_json(const Json& j, RunManifest m = {}) {
  static const std::vector<std::string> known{
      "command", "input_path", "indicator_col", "outcome_col", "covariates", "link",
      "mode", "variants", "seed", "n", "nrep", "nboot", "workers", "sign",
      "emit_samples", "output", "fitted_output", "controls"};
  require(j.is_object(), "manifest must be a JSON object");
  try {
    for (const auto& [key, _] : j.items())
      require(std::find(known.begin(), known.end(), key) != known.end(),
              "unknown manifest key '" + key + "'");
    auto has = [&](const char* k) { return j.contains(k) && !j.at(k).is_null(); };
    if (has("command")) m.command = parse_command(j.at("command").get<std::string>());
    if (has("input_path")) m.input_path = j.at("input_path").get<std::string>();
    if (has("indicator_col")) m.indicator_col = j.at("indicator_col").get<std::string>();
    if (has("outcome_col")) m.outcome_col = j.at("outcome_col").get<std::string>();
    if (has("covariates")) m.covariates = j.at("covariates").get<std::vector<std::string>>();
    if (has("link")) m.link = parse_link(j.at("link").get<std::string>()).kind();
    if (has("mode")) m.mode = parse_mode(j.at("mode").get<std::string>());
    if (has("variants")) {
      m.variants.clear();
      for (const auto& v : j.at("variants")) m.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (has("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    if (has("n")) m.n = j.at("n").get<int>();
    if (has("nrep")) m.nrep = j.at("nrep").get<int>();
    if (has("nboot")) m.nboot = j.at("nboot").get<int>();
    if (has("workers")) m.workers = j.at("workers").get<int>();
    if (has("sign")) m.sign = parse_sign(j.at("sign").get<std::string>());
    if (has("emit_samples")) m.emit_samples = j.at("emit_samples").get<std::string>();
    if (has("output")) m.output = j.at("output").get<std::string>();
    if (has("fitted_output")) m.fitted_output = j.at("fitted_output").get<std::string>();
    if (has("controls")) {
      const Json& c = j.at("controls");
      SolverControls& s = m.fit.controls;
      auto set = [&](const char* k, auto& field) {
        if (c.contains(k)) field = c.at(k).get<std::decay_t<decltype(field)>>();
      };
      set("max_newton_iters", s.max_newton_iters);
      set("newton_tol", s.newton_tol);
      set("max_step_halvings", s.max_step_halvings);
      set("bound_margin", s.bound_margin);
      set("scalar_opt_tol", s.scalar_opt_tol);
      set("beta_norm_cap", s.beta_norm_cap);
      set("max_scalar_iters", s.max_scalar_iters);
      set("max_outer_iters", m.fit.max_outer_iters);
      set("outer_tol", m.fit.outer_tol);
      set("guard_threshold", m.fit.guard_threshold);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

inline RunManifest load_manifest(const std::string& path, RunManifest defaults = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, std::move(defaults));
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return 2;
    case ErrorKind::non_convergence: return 3;
    case ErrorKind::degenerate_estimation: return 4;
    case ErrorKind::bootstrap_unreliable: return 5;
  }
  return 1;
}

namespace detail {

inline void validate_manifest(const RunManifest& m) {
  m.fit.controls.validate();
  require(m.workers >= 1, "workers must be at least 1");
  if (m.command == Command::simulate) {
    require(m.n > 0 && m.nrep > 0, "n and nrep must be positive");
    return;
  }
  require(!m.input_path.empty(), "--input is required for " + std::string(to_string(m.command)));
  require(!m.indicator_col.empty(), "--indicator-col is required");
  require(!m.covariates.empty(), "--covariates must list the propensity covariates");
  if (m.command != Command::fit)
    require(m.outcome_col.has_value(), "--outcome-col is required for " +
                                           std::string(to_string(m.command)));
  if (m.command == Command::estimate_mean) {
    for (Variant v : effective_variants(m))
      require(!uses_correction(v), "estimate-mean accepts variants O and P only");
  }
  if (m.command == Command::bootstrap) require(m.nboot >= 2, "nboot must be at least 2");
}

inline Dataset load_input(const RunManifest& m) {
  ColumnRoles roles{m.indicator_col, m.outcome_col, m.covariates};
  Dataset data = parse_csv(m.input_path, roles, effective_mode(m));
  data.validate();
  return data;
}

inline EstimatorSpec spec_for(const RunManifest& m, Estimand estimand, Variant v) {
  EstimatorSpec spec;
  spec.estimand = estimand;
  spec.variant = v;
  spec.link = Link(m.link);
  spec.fit = m.fit;
  return spec;
}

inline std::string sample_file_name(const SimulationConfig& cfg) {
  return "sample_delta" + format_double(cfg.delta0) + "_epsilon" + format_double(cfg.epsilon0) +
         "_rep0.csv";
}

inline std::string run_command(const RunManifest& m) {
  const Link link(m.link);
  switch (m.command) {
    case Command::fit: {
      const Dataset data = load_input(m);
      const FitResult fit = fit_spps(data, link, effective_mode(m), m.fit);
      Json j = to_json(fit, data.covariate_names);
      j["link"] = std::string(link.name());
      j["n"] = data.rows();
      if (!m.fitted_output.empty()) {
        std::ofstream f(m.fitted_output, std::ios::binary);
        if (!f) throw InputError("cannot write '" + m.fitted_output + "'");
        f << "row,propensity\n";
        for (Eigen::Index i = 0; i < fit.fitted.size(); ++i)
          f << i + 1 << ',' << format_double(fit.fitted[i]) << '\n';
      }
      return j.dump(2) + "\n";
    }
    case Command::estimate_mean:
    case Command::estimate_ate: {
      const Dataset data = load_input(m);
      const Estimand estimand =
          m.command == Command::estimate_ate ? Estimand::ate : Estimand::population_mean;
      Json reports = Json::array();
      for (Variant v : effective_variants(m))
        reports.push_back(to_json(estimate(data, spec_for(m, estimand, v))));
      return Json{{"reports", reports}}.dump(2) + "\n";
    }
    case Command::bootstrap: {
      const Dataset data = load_input(m);
      const Estimand estimand =
          effective_mode(m) == Mode::treatment ? Estimand::ate : Estimand::population_mean;
      BootstrapConfig cfg;
      cfg.n_boot = m.nboot;
      cfg.seed = m.seed;
      cfg.workers = m.workers;
      Json reports = Json::array();
      for (Variant v : effective_variants(m))
        reports.push_back(bootstrap_report_json(
            bootstrap_estimate(data, spec_for(m, estimand, v), cfg)));
      return Json{{"reports", reports}}.dump(2) + "\n";
    }
    case Command::simulate: {
      SimulationConfig base;
      base.n = m.n;
      base.nrep = m.nrep;
      base.seed = m.seed;
      base.sign = m.sign;
      const std::vector<SimulationConfig> grid = default_grid(base);
      if (!m.emit_samples.empty()) {
        std::filesystem::create_directories(m.emit_samples);
        for (const auto& cfg : grid) {
          const auto path = std::filesystem::path(m.emit_samples) / sample_file_name(cfg);
          std::ofstream f(path, std::ios::binary);
          if (!f) throw InputError("cannot write '" + path.string() + "'");
          write_csv(f, generate_replicate(cfg, 0).data);
        }
      }
      MonteCarloOptions opts;
      opts.workers = m.workers;
      opts.link = link;
      opts.fit = m.fit;
      const MseTable table = run_monte_carlo(grid, opts);
      const bool json = std::filesystem::path(m.output).extension() == ".json";
      return json ? to_json(table).dump(2) + "\n" : mse_table_csv(table);
    }
  }
  return {};
}

}  // namespace detail

/// Executes a manifest. Results go to m.output (or `out`); failures print a
/// JSON error object to `err` and return the kind's exit code.
inline int run(const RunManifest& m, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  try {
    detail::validate_manifest(m);
    const std::string text = detail::run_command(m);
    if (m.output.empty()) {
      out << text;
    } else {
      std::ofstream f(m.output, std::ios::binary);
      if (!f) throw InputError("cannot write output file '" + m.output + "'");
      f << text;
    }
    return 0;
  } catch (const Error& e) {
    err << error_json(e).dump(2) << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << Json{{"error", "internal"}, {"message", e.what()}}.dump(2) << '\n';
    return 1;
  }
}

}  // namespace spps
