#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spps/errors.hpp"
#include "spps/estimators.hpp"
#include "spps/parallel.hpp"
#include "spps/pipeline.hpp"
#include "spps/rng.hpp"
#include "spps/types.hpp"

namespace spps {

struct BootstrapConfig {
  int n_boot = 1000;
  double z_value = 1.96;
  std::uint64_t seed = 20240601;
  int workers = 1;
  double max_failure_fraction = 0.2;

  void validate() const {
    require(n_boot >= 2, "n_boot must be at least 2");
    require(z_value > 0.0, "z_value must be positive");
    require(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0,
            "max_failure_fraction must lie in [0, 1]");
  }
};

struct BootstrapResult {
  double estimate = 0.0;
  BootstrapSummary summary;
  std::vector<std::optional<double>> replicates;  // nullopt where the refit failed
};

class BootstrapUnreliable : public Error {
 public:
  BootstrapUnreliable(const std::string& what, BootstrapResult partial)
      : Error(ErrorKind::bootstrap_unreliable, what), partial_(std::move(partial)) {}
  const BootstrapResult& partial() const { return partial_; }

 private:
  BootstrapResult partial_;
};

/// Row indices of one resample: row i is replaced by a uniform draw from the
/// rows sharing its indicator value, so each group keeps its size and position.
inline std::vector<Eigen::Index> stratified_resample_indices(const Eigen::VectorXd& indicator,
                                                             Rng& rng) {
  std::vector<Eigen::Index> groups[2];
  for (Eigen::Index i = 0; i < indicator.size(); ++i)
    groups[indicator[i] == 1.0 ? 1 : 0].push_back(i);
  std::vector<Eigen::Index> out(static_cast<std::size_t>(indicator.size()));
  for (Eigen::Index i = 0; i < indicator.size(); ++i) {
    const auto& g = groups[indicator[i] == 1.0 ? 1 : 0];
    out[static_cast<std::size_t>(i)] = g[rng.below(g.size())];
  }
  return out;
}

namespace detail {

inline BootstrapSummary summarize_draws(double estimate,
                                        const std::vector<std::optional<double>>& draws,
                                        double z_value) {
  BootstrapSummary s;
  std::vector<double> ok;
  for (const auto& d : draws) {
    if (d && std::isfinite(*d)) ok.push_back(*d);
    else ++s.n_fail;
  }
  s.n_boot_effective = static_cast<int>(ok.size());
  if (ok.size() >= 2) {
    // Deviations from the first draw keep a constant statistic at exactly zero.
    const double shift = ok.front();
    double mean = 0.0;
    for (double v : ok) mean += v - shift;
    mean /= static_cast<double>(ok.size());
    double ss = 0.0;
    for (double v : ok) ss += (v - shift - mean) * (v - shift - mean);
    s.se = std::sqrt(ss / static_cast<double>(ok.size() - 1));
  }
  s.ci_low = estimate - z_value * s.se;
  s.ci_high = estimate + z_value * s.se;
  return s;
}

}  // namespace detail

/// Stratified bootstrap of an arbitrary statistic. Resample b always draws from
/// substream (seed, b); resamples on which `statistic` throws spps::Error are
/// dropped and counted.
template <typename Statistic>
BootstrapResult bootstrap_statistic(const Dataset& data, Statistic&& statistic,
                                    const BootstrapConfig& config) {
  config.validate();
  const Eigen::Index ones = data.count_ones();
  require(ones > 0 && ones < data.rows(), "bootstrap needs both indicator groups nonempty");
  BootstrapResult result;
  result.estimate = statistic(data);
  result.replicates.resize(static_cast<std::size_t>(config.n_boot));
  parallel_for(result.replicates.size(), config.workers, [&](std::size_t b) {
    Rng rng(config.seed, b);
    const Dataset resample = data.subset(stratified_resample_indices(data.indicator, rng));
    try {
      result.replicates[b] = statistic(resample);
    } catch (const Error&) {
    }
  });
  result.summary = detail::summarize_draws(result.estimate, result.replicates, config.z_value);
  const double failed = static_cast<double>(result.summary.n_fail);
  if (failed > config.max_failure_fraction * config.n_boot || result.summary.n_boot_effective < 2)
    throw BootstrapUnreliable(std::to_string(result.summary.n_fail) + " of " +
                                  std::to_string(config.n_boot) + " bootstrap refits failed",
                              std::move(result));
  return result;
}

/// Point estimate on the original data plus bootstrap SE and normal interval,
/// refitting the propensity model on every resample.
inline EstimateReport bootstrap_estimate(const Dataset& data, const EstimatorSpec& spec,
                                         const BootstrapConfig& config) {
  data.validate();
  config.validate();
  const Eigen::Index ones = data.count_ones();
  require(ones > 0 && ones < data.rows(), "bootstrap needs both indicator groups nonempty");
  EstimateReport report = estimate(data, spec);
  const BootstrapResult boot = bootstrap_statistic(
      data, [&spec](const Dataset& d) { return estimate(d, spec).value; }, config);
  report.bootstrap = boot.summary;
  if (boot.summary.n_fail > 0)
    report.warnings.push_back(std::to_string(boot.summary.n_fail) +
                              " bootstrap resamples failed and were dropped");
  return report;
}

}  // namespace spps
