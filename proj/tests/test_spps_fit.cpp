#include <catch_amalgamated.hpp>

#include <cmath>

#include "spps/spps_fit.hpp"
#include "support.hpp"

using namespace spps;
using Catch::Approx;

namespace {

void check_trace(const FitResult& fit) {
  for (std::size_t k = 1; k < fit.trace.size(); ++k)
    CHECK(fit.trace[k].loglik >= fit.trace[k - 1].loglik - 1e-10);
}

}  // namespace

TEST_CASE("trace is monotone and the bounded fit nests the plain fit") {
  int unguarded = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const double eps = 0.05 * static_cast<double>(seed % 4);
    const double del = 0.05 * static_cast<double>(seed % 3);
    const Link link = seed % 5 == 0 ? Link::probit() : Link::logistic();
    const Dataset d = testing::draw_bounded(600, testing::vec({0.1, 1.4, -0.8}), eps, del, seed, link);
    const FitResult fit = fit_spps(d, link, Mode::treatment);
    check_trace(fit);
    if (!fit.guard_triggered) {
      ++unguarded;
      CHECK(fit.loglik >= fit.plain_loglik - 1e-9);
    }
    CHECK(fit.theta_hat.epsilon >= 0.0);
    CHECK(fit.theta_hat.delta >= 0.0);
    CHECK(fit.theta_hat.epsilon + fit.theta_hat.delta < 1.0);
    CHECK(fit.loglik == Approx(log_likelihood(d, fit.theta_hat, link)).epsilon(1e-12));
  }
  CHECK(unguarded > 20);
}

TEST_CASE("bounded fit recovers the generating parameters") {
  const auto beta = testing::vec({0.0, 2.0, -1.5});
  const Dataset d = testing::draw_bounded(30000, beta, 0.1, 0.15, 11);
  const FitResult fit = fit_spps(d, Link::logistic(), Mode::treatment);
  REQUIRE(fit.converged);
  CHECK_FALSE(fit.guard_triggered);
  CHECK(fit.theta_hat.epsilon == Approx(0.1).margin(0.03));
  CHECK(fit.theta_hat.delta == Approx(0.15).margin(0.03));
  CHECK((fit.theta_hat.beta - beta).cwiseAbs().maxCoeff() < 0.35);
  CHECK(fit.loglik > fit.plain_loglik);
}

TEST_CASE("missing-data mode keeps delta at zero") {
  const Dataset d = testing::draw_bounded(3000, testing::vec({0.0, 1.5}), 0.2, 0.0, 5);
  const FitResult fit = fit_spps(d, Link::logistic(), Mode::missing_data);
  CHECK(fit.theta_hat.delta == 0.0);
  CHECK(fit.theta_hat.mode == Mode::missing_data);
  CHECK(fit.theta_hat.epsilon == Approx(0.2).margin(0.06));
  check_trace(fit);
}

TEST_CASE("guard keeps the plain fit when the fitted range is narrow") {
  // weak covariate effect: plain fitted values stay near 0.5
  const Dataset d = testing::draw_bounded(500, testing::vec({0.0, 0.1}), 0.0, 0.0, 21);
  const FitResult fit = fit_spps(d, Link::logistic(), Mode::treatment);
  CHECK(fit.guard_triggered);
  CHECK(fit.fallback_plain_glm);
  CHECK(fit.theta_hat.epsilon == 0.0);
  CHECK(fit.theta_hat.delta == 0.0);
  CHECK(fit.theta_hat.beta == fit.plain_beta);
  CHECK(fit.loglik == fit.plain_loglik);
  // the guard is a treatment-mode rule
  const FitResult missing = fit_spps(d, Link::logistic(), Mode::missing_data);
  CHECK_FALSE(missing.guard_triggered);
}

TEST_CASE("warm start is honored and validated") {
  const auto beta = testing::vec({0.0, 2.0, -1.5});
  const Dataset d = testing::draw_bounded(2000, beta, 0.1, 0.1, 3);
  FitOptions opts;
  opts.warm_start = Theta(0.1, 0.1, beta);
  const FitResult fit = fit_spps(d, Link::logistic(), Mode::treatment, opts);
  CHECK(fit.trace.front().loglik == Approx(log_likelihood(d, *opts.warm_start, Link::logistic())));
  check_trace(fit);
  opts.warm_start = Theta(0.1, 0.1, testing::vec({0.0, 1.0}));
  CHECK_THROWS_AS(fit_spps(d, Link::logistic(), Mode::treatment, opts), InputError);
  opts.warm_start = Theta(0.1, 0.1, beta, Mode::missing_data);
  CHECK_THROWS_AS(fit_spps(d, Link::logistic(), Mode::treatment, opts), InputError);
}

TEST_CASE("profile likelihood oracle on a coarse grid") {
  const Link link = Link::logistic();
  const Dataset d = testing::draw_bounded(800, testing::vec({0.0, 2.0, -1.0}), 0.1, 0.1, 14);
  const FitResult fit = fit_spps(d, link, Mode::treatment);
  REQUIRE_FALSE(fit.guard_triggered);
  const StepResult plain = fit_plain_glm(d, link);
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < 12; ++a) {
    for (int b = 0; b < 12; ++b) {
      const double eps = 0.3 * a / 11.0, del = 0.3 * b / 11.0;
      try {
        best = std::max(best, beta_step(d, link, eps, del, plain.value, {}).loglik);
      } catch (const NonConvergence&) {
      }
    }
  }
  CHECK(fit.loglik >= best - 1e-6);
}

TEST_CASE("identifiability diagnostics") {
  Dataset d = testing::draw_bounded(200, testing::vec({0.0, 1.0, 1.0}), 0.0, 0.0, 9);
  Diagnostics ok = check_identifiability(d);
  CHECK(ok.full_rank);
  CHECK(ok.rank == 3);
  CHECK(std::isfinite(ok.condition_number));
  REQUIRE(ok.index_min.has_value());

  Dataset binary = d;
  for (Eigen::Index i = 0; i < binary.rows(); ++i) {
    binary.design(i, 1) = binary.design(i, 1) > 0.0 ? 1.0 : 0.0;
    binary.design(i, 2) = binary.design(i, 2) > 0.3 ? 1.0 : 0.0;
  }
  const Diagnostics bin = check_identifiability(binary);
  bool warned = false;
  for (const auto& w : bin.warnings) warned |= w.find("two levels") != std::string::npos;
  CHECK(warned);

  d.design.col(2) = d.design.col(1);
  const Diagnostics deficient = check_identifiability(d);
  CHECK_FALSE(deficient.full_rank);
  CHECK(deficient.rank == 2);
  CHECK_FALSE(deficient.warnings.empty());
  CHECK_THROWS_AS(fit_spps(d, Link::logistic(), Mode::treatment), InputError);
}
