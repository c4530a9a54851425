#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <set>

#include "spps/rng.hpp"
#include "spps/simulation.hpp"

using namespace spps;
using Catch::Approx;

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.975) == Approx(1.959963984540054).epsilon(1e-15));
  CHECK(normal_quantile(1e-10) == Approx(-6.361340902404056).epsilon(1e-13));
  for (double p = 0.001; p < 1.0; p += 0.0123) {
    const double z = normal_quantile(p);
    CHECK(0.5 * std::erfc(-z / std::sqrt(2.0)) == Approx(p).epsilon(1e-13));
    CHECK(normal_quantile(1.0 - p) == Approx(-z).epsilon(1e-12).margin(1e-14));
  }
  CHECK(std::isinf(normal_quantile(0.0)));
  CHECK(std::isnan(normal_quantile(1.5)));
}

TEST_CASE("substreams are reproducible and distinct") {
  Rng a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  CHECK(x != d.next_u64());
}

TEST_CASE("uniform, normal and below moments") {
  Rng rng(1, 0);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  std::array<int, 7> counts{};
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    ++counts[rng.below(7)];
  }
  CHECK(su / n == Approx(0.5).margin(0.003));
  CHECK(sn / n == Approx(0.0).margin(0.01));
  CHECK(sn2 / n == Approx(1.0).margin(0.015));
  double chi2 = 0;
  for (int k : counts) chi2 += std::pow(k - n / 7.0, 2) / (n / 7.0);
  CHECK(chi2 < 22.5);  // 6 df, p ~ 0.001
}

TEST_CASE("simulated covariates follow the default design") {
  SimulationConfig cfg;
  cfg.n = 100000;
  Rng rng(cfg.seed, 0);
  const SimulatedSample s = generate_sample(cfg, rng);
  const auto& X = s.data.design;
  CHECK(X.col(0).minCoeff() == 1.0);
  CHECK(X.col(3).mean() == Approx(0.2).margin(0.005));
  CHECK(X.col(6).mean() == Approx(0.35).margin(0.006));
  // (X1, V1, X2, V2) given X3 = 0: mean rho0, covariance sigma
  std::vector<Eigen::Vector4d> rows;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (X(i, 3) == 0.0) rows.emplace_back(X(i, 1), X(i, 4), X(i, 2), X(i, 5));
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  for (const auto& r : rows) mean += r;
  mean /= static_cast<double>(rows.size());
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  for (const auto& r : rows) cov += (r - mean) * (r - mean).transpose();
  cov /= static_cast<double>(rows.size() - 1);
  CHECK((mean - cfg.rho0).cwiseAbs().maxCoeff() < 0.02);
  CHECK((cov - cfg.sigma).cwiseAbs().maxCoeff() < 0.02);
  // propensity within bounds and matches its formula
  for (Eigen::Index i = 0; i < 100; ++i) {
    const double index = X.row(i).dot(cfg.beta0);
    CHECK(s.propensity[i] == Approx(1.0 / (1.0 + std::exp(index))).epsilon(1e-14));
  }
  // outcome residual is standard normal
  const Eigen::VectorXd& y = *s.data.outcome;
  double sr = 0, sr2 = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double r = y[i] - (-X(i, 1) + X(i, 2) - X(i, 3) + 2 * s.data.indicator[i] - X(i, 4) +
                             X(i, 5) + X(i, 6));
    sr += r;
    sr2 += r * r;
  }
  CHECK(sr / X.rows() == Approx(0.0).margin(0.015));
  CHECK(sr2 / X.rows() == Approx(1.0).margin(0.02));
}

TEST_CASE("flat propensity near the bound limit") {
  SimulationConfig cfg;
  cfg.n = 100000;
  cfg.epsilon0 = 0.5 - 1e-9;
  cfg.delta0 = 0.5 - 1e-9;
  Rng rng(cfg.seed, 1);
  const SimulatedSample s = generate_sample(cfg, rng);
  CHECK(s.data.indicator.mean() == Approx(0.5).margin(0.006));
  CHECK(s.propensity.maxCoeff() - s.propensity.minCoeff() < 1e-8);
}

TEST_CASE("propensity sign conventions mirror each other") {
  SimulationConfig printed, standard;
  standard.sign = PropensitySign::standard;
  printed.epsilon0 = standard.epsilon0 = 0.1;
  printed.delta0 = standard.delta0 = 0.2;
  for (double u : {-3.0, -0.5, 0.0, 1.2, 40.0}) {
    CHECK(simulation_propensity(printed, u) == Approx(0.1 + 0.7 / (1 + std::exp(u))));
    CHECK(simulation_propensity(standard, u) == Approx(0.1 + 0.7 / (1 + std::exp(-u))));
  }
}

TEST_CASE("invalid configurations are rejected") {
  SimulationConfig cfg;
  cfg.epsilon0 = 0.5;
  cfg.delta0 = 0.5;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = SimulationConfig{};
  cfg.sigma(0, 1) = 2.0;
  cfg.sigma(1, 0) = 2.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("default grid enumerates the valid default cells") {
  const auto grid = default_grid(SimulationConfig{});
  CHECK(grid.size() == 48);
  CHECK(grid.front().delta0 == 0.0);
  CHECK(grid.front().epsilon0 == 0.0);
  CHECK(grid[1].epsilon0 == 0.05);
  CHECK(grid.back().delta0 == 0.5);
  CHECK(grid.back().epsilon0 == 0.4);
  std::set<std::pair<double, double>> seen;
  for (const auto& c : grid) {
    CHECK(c.epsilon0 + c.delta0 < 1.0);
    seen.insert({c.delta0, c.epsilon0});
  }
  CHECK(seen.size() == 48);
}

TEST_CASE("summaries use nrep as the MSE denominator") {
  SimulationConfig cfg;
  std::vector<ReplicateEstimates> reps(4);
  const double vals[4] = {2.5, 1.0, 2.0, 3.0};
  for (int r = 0; r < 4; ++r) reps[r] = {vals[r], 2.0, std::nullopt, vals[r]};
  const CellResult cell = summarize_cell(cfg, reps);
  CHECK(cell.mse[0] == Approx((0.25 + 1 + 0 + 1) / 4.0));
  CHECK(cell.mse[1] == 0.0);
  CHECK(cell.n_fail[2] == 4);
  CHECK(std::isnan(cell.mse[2]));
  // SE of the squared errors: sd(0.25, 1, 0, 1) / 2
  const double m = 2.25 / 4, ss = std::pow(0.25 - m, 2) + 2 * std::pow(1 - m, 2) + m * m;
  CHECK(cell.mc_se[0] == Approx(std::sqrt(ss / 3) / 2));
}

TEST_CASE("oracle evaluator yields zero MSE everywhere") {
  SimulationConfig base;
  base.n = 50;
  base.nrep = 3;
  MonteCarloOptions opts;
  opts.evaluator = [](const SimulatedSample&) {
    return ReplicateEstimates{2.0, 2.0, 2.0, 2.0};
  };
  const MseTable t = run_monte_carlo(default_grid(base), opts);
  for (const auto& c : t.cells)
    for (double m : c.mse) CHECK(m == 0.0);
}

TEST_CASE("Monte Carlo results do not depend on worker count") {
  SimulationConfig base;
  base.n = 300;
  base.nrep = 4;
  const auto grid = default_grid(base, {0.0, 0.3}, {0.0, 0.1});
  MonteCarloOptions one, three;
  three.workers = 3;
  const MseTable a = run_monte_carlo(grid, one);
  const MseTable b = run_monte_carlo(grid, three);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    for (int k = 0; k < 4; ++k) {
      CHECK(std::memcmp(&a.cells[c].mse[k], &b.cells[c].mse[k], sizeof(double)) == 0);
    }
    CHECK(a.cells[c].estimates == b.cells[c].estimates);
  }
}

TEST_CASE("replicate r is drawn from substream r") {
  SimulationConfig cfg;
  cfg.n = 20;
  Rng rng(cfg.seed, 5);
  const SimulatedSample manual = generate_sample(cfg, rng);
  const SimulatedSample rep = generate_replicate(cfg, 5);
  CHECK(manual.data.design == rep.data.design);
  CHECK(manual.data.indicator == rep.data.indicator);
}
