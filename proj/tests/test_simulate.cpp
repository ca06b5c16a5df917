#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "kbos/error.hpp"
#include "kbos/simulate.hpp"
#include "kbos/stats.hpp"

using namespace kbos;
using fx::c;

TEST_CASE("paths are reproducible and start at the initial state") {
  const ModelSpec m = fx::rich();
  const TimeGrid g(1000, 1.0);
  const auto p1 = simulate_path(m, 1.1, g, 5);
  const auto p2 = simulate_path(m, 1.1, g, 5);
  const auto p3 = simulate_path(m, 1.1, g, 6);
  CHECK(p1.X == p2.X);
  CHECK(p1.Y == p2.Y);
  CHECK(p1.X != p3.X);
  CHECK(p1.X[0] == 0.0);
  CHECK(p1.Y[0] == m.y0());
  CHECK(p1.X.size() == g.size());
  CHECK(p1.seed == 5);
  CHECK(p1.theta_true == 1.1);
}

TEST_CASE("prefix paths are bitwise prefixes") {
  const ModelSpec m = fx::ex1();
  const TimeGrid g(1000, 1.0);
  const auto full = simulate_path(m, 1.0, g, 11);
  const auto pre = simulate_prefix(m, 1.0, g, 11, 250);
  REQUIRE(pre.X.size() == 251);
  for (std::size_t k = 0; k <= 250; ++k) {
    CHECK(pre.X[k] == full.X[k]);
    CHECK(pre.Y[k] == full.Y[k]);
  }
  const auto cut = truncate(full, 250);
  CHECK(cut.X == pre.X);
  CHECK(cut.grid == pre.grid);
}

TEST_CASE("parameter outside the interval is rejected") {
  CHECK_THROWS_AS(simulate_path(fx::toy(), 2.0, TimeGrid(10, 1.0), 1), InputError);
}

TEST_CASE("noise-free paths follow the limit system") {
  const ModelSpec m = fx::ex1(0.0);
  const TimeGrid g(100000, 1.0);
  const auto p = simulate_path(m, 1.2, g, 1);
  const auto lim = limit_system(m, 1.2, g);
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); k += 100) {
    worst = std::max(worst, std::abs(p.Y[k] - lim.y[k]));
    worst = std::max(worst, std::abs(p.X[k] - lim.x[k]));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("weak order one in the step") {
  // Euler mean error for the noise-free path halves with the step.
  const ModelSpec m = fx::rich(0.0);
  const auto exact = oracle::limit(fx::rich_oracle(), 1.0, 1.0, 1.0);
  double prev = 0.0;
  for (std::size_t n : {200, 400, 800}) {
    const auto p = simulate_path(m, 1.0, TimeGrid(n, 1.0), 1);
    const double err = std::abs(p.Y.back() - exact.y) + std::abs(p.X.back() - exact.x);
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(2.0).epsilon(0.1));
    prev = err;
  }
}

TEST_CASE("state mean and observation noise variance") {
  const ModelSpec m = fx::toy(0.05);
  const TimeGrid g(500, 1.0);
  const PathSimulator sim(m, 1.0, g);
  std::vector<double> yT, eta;
  for (std::uint64_t s = 1; s <= 10000; ++s) {
    const auto p = sim(s);
    yT.push_back(p.Y.back());
    eta.push_back((p.X.back() - 1.0) / m.eps());
  }
  const auto sy = summarize(yT);
  CHECK(std::abs(sy.mean - 1.0) <= 3.0 * std::sqrt(sy.variance / sy.n));
  const auto se = summarize(eta);
  const double target = oracle::toy_eta_var(1.0, 1.0);
  CHECK(std::abs(se.variance - target) <= 4.0 * target * std::sqrt(2.0 / se.n));
}

TEST_CASE("moment probe scales linearly in tau") {
  const ModelSpec m = fx::toy(0.01);
  const TimeGrid g(10000, 1.0);
  const std::vector<double> taus{0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
  const auto rows = moment_scaling_probe(m, 1.0, g, taus, 4000, 1);
  REQUIRE(rows.size() == taus.size());
  std::vector<double> ms;
  for (const auto& r : rows) ms.push_back(r.mean_sq);
  const auto fit = rate_fit(taus, ms);
  CHECK(fit.slope >= 0.8);
  CHECK(fit.slope <= 1.2);
  // tau = 0.1: tau + tau^3 / 3
  CHECK(std::abs(rows[3].mean_sq - 0.100333) <= 3.0 * rows[3].stderr_);
}

TEST_CASE("moment probe without state noise is sigma^2 tau") {
  const ModelSpec m(Expr::theta(), c(0), c(1.5), c(0), 0.5, 1.5, 1, 1, 0.01,
                    ThetaLocation::InF);
  const TimeGrid g(1000, 1.0);
  const auto rows = moment_scaling_probe(m, 1.0, g, {0.1, 0.4}, 4000, 3);
  CHECK(std::abs(rows[0].mean_sq - 2.25 * 0.1) <= 3.0 * rows[0].stderr_);
  CHECK(std::abs(rows[1].mean_sq - 2.25 * 0.4) <= 3.0 * rows[1].stderr_);
  CHECK_THROWS_AS(moment_scaling_probe(m, 1.0, g, {0.1}, 1, 3), InputError);
}
