// Command-line front end: spps <fit|estimate-mean|estimate-ate|simulate|bootstrap> [flags]
// Every flag can also be set through an SPPS_* environment variable, and
// --manifest loads the same settings from JSON; explicit flags win.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spps/cli.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text + ",") {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounded-link propensity score fitting and IPW estimation"};
  app.require_subcommand(1);
  for (const char* name : {"fit", "estimate-mean", "estimate-ate", "simulate", "bootstrap"})
    app.add_subcommand(name)->fallthrough();

  std::string manifest_path, input, indicator, outcome, covariates, link, mode, variants, sign;
  std::string emit_samples, output, fitted_output;
  std::uint64_t seed = 0;
  int nrep = 0, n = 0, nboot = 0, workers = 0;

  auto* o_manifest = app.add_option("--manifest", manifest_path, "JSON run manifest")
                         ->envname("SPPS_MANIFEST");
  auto* o_input = app.add_option("--input", input, "input CSV")->envname("SPPS_INPUT");
  auto* o_ind = app.add_option("--indicator-col", indicator, "0/1 indicator column")
                    ->envname("SPPS_INDICATOR_COL");
  auto* o_out = app.add_option("--outcome-col", outcome, "outcome column")
                    ->envname("SPPS_OUTCOME_COL");
  auto* o_cov = app.add_option("--covariates", covariates, "comma-separated propensity covariates")
                    ->envname("SPPS_COVARIATES");
  auto* o_link = app.add_option("--link", link, "logistic or probit")
                     ->check(CLI::IsMember({"logistic", "logit", "probit"}))
                     ->envname("SPPS_LINK");
  auto* o_mode = app.add_option("--mode", mode, "missing or treatment")
                     ->check(CLI::IsMember({"missing", "treatment"}))
                     ->envname("SPPS_MODE");
  auto* o_var = app.add_option("--variant", variants, "comma-separated subset of O,P,LD,PLD")
                    ->envname("SPPS_VARIANT");
  auto* o_seed = app.add_option("--seed", seed, "RNG seed")->envname("SPPS_SEED");
  auto* o_nrep = app.add_option("--nrep", nrep, "Monte Carlo replicates per cell")
                     ->check(CLI::PositiveNumber)
                     ->envname("SPPS_NREP");
  auto* o_n = app.add_option("--n", n, "simulated sample size")
                  ->check(CLI::PositiveNumber)
                  ->envname("SPPS_N");
  auto* o_nboot = app.add_option("--nboot", nboot, "bootstrap resamples")
                      ->check(CLI::Range(2, 1 << 30))
                      ->envname("SPPS_NBOOT");
  auto* o_workers = app.add_option("--workers", workers, "worker threads")
                        ->check(CLI::PositiveNumber)
                        ->envname("SPPS_WORKERS");
  auto* o_sign = app.add_option("--sign", sign, "simulated propensity sign: as-printed or standard")
                     ->check(CLI::IsMember({"as-printed", "standard"}))
                     ->envname("SPPS_SIGN");
  auto* o_emit = app.add_option("--emit-samples", emit_samples,
                                "directory for the first simulated sample of every cell")
                     ->envname("SPPS_EMIT_SAMPLES");
  auto* o_output = app.add_option("--output", output, "output file (.json for JSON tables)")
                       ->envname("SPPS_OUTPUT");
  auto* o_fitted = app.add_option("--fitted-output", fitted_output,
                                  "fit: CSV of fitted propensities")
                       ->envname("SPPS_FITTED_OUTPUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    spps::RunManifest m;
    if (o_manifest->count() > 0) m = spps::load_manifest(manifest_path);
    m.command = spps::parse_command(app.get_subcommands().front()->get_name());
    if (o_input->count()) m.input_path = input;
    if (o_ind->count()) m.indicator_col = indicator;
    if (o_out->count()) m.outcome_col = outcome;
    if (o_cov->count()) m.covariates = split_list(covariates);
    if (o_link->count()) m.link = spps::parse_link(link).kind();
    if (o_mode->count()) m.mode = spps::parse_mode(mode);
    if (o_var->count()) {
      m.variants.clear();
      for (const auto& v : split_list(variants)) m.variants.push_back(spps::parse_variant(v));
    }
    if (o_seed->count()) m.seed = seed;
    if (o_nrep->count()) m.nrep = nrep;
    if (o_n->count()) m.n = n;
    if (o_nboot->count()) m.nboot = nboot;
    if (o_workers->count()) m.workers = workers;
    if (o_sign->count()) m.sign = spps::parse_sign(sign);
    if (o_emit->count()) m.emit_samples = emit_samples;
    if (o_output->count()) m.output = output;
    if (o_fitted->count()) m.fitted_output = fitted_output;
    return spps::run(m);
  } catch (const spps::Error& e) {
    std::cerr << spps::error_json(e).dump(2) << '\n';
    return spps::exit_code(e.kind());
  }
}
