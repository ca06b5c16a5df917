#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <boost/numeric/odeint.hpp>

#include "fixtures.hpp"
#include "kbos/error.hpp"
#include "kbos/kbfilter.hpp"
#include "kbos/model.hpp"

using namespace kbos;
using fx::c;

TEST_CASE("time grid endpoints and prefix") {
  const TimeGrid g(1000, 2.0);
  CHECK(g.node(0) == 0.0);
  CHECK(g.node(1000) == 2.0);
  for (std::size_t k = 1; k <= 1000; ++k) CHECK(g.node(k) > g.node(k - 1));
  const TimeGrid p = g.prefix(100);
  CHECK(p.step() == g.step());
  CHECK(p.node(100) == g.node(100));
  CHECK(g.nearest_index(0.1004) == 50);
  CHECK_THROWS_AS(g.nearest_index(2.5), InputError);
  CHECK_THROWS_AS(TimeGrid(0, 1.0), InputError);
  CHECK_THROWS_AS(g.prefix(1001), InputError);
}

TEST_CASE("model validation") {
  const Expr th = Expr::theta();
  CHECK_THROWS_AS(ModelSpec(th, c(0), c(1), c(1), 1.5, 0.5, 1, 1, 0.01, ThetaLocation::InF),
                  InputError);
  CHECK_THROWS_AS(ModelSpec(th, c(0), c(1), c(1), 0.5, 1.5, 0, 1, 0.01, ThetaLocation::InF),
                  InputError);
  CHECK_THROWS_AS(ModelSpec(th, c(0), c(1), c(1), 0.5, 1.5, 1, 1, -0.1, ThetaLocation::InF),
                  InputError);
  CHECK_THROWS_AS(ModelSpec(th, c(0), th, c(1), 0.5, 1.5, 1, 1, 0.01, ThetaLocation::InF),
                  InputError);
  // sigma crosses zero at t = 1/2
  CHECK_THROWS_AS(ModelSpec(th, c(0), c(1) + c(-2) * Expr::time(), c(1), 0.5, 1.5, 1, 1,
                            0.01, ThetaLocation::InF),
                  InputError);
  // f(theta, 0) = 0
  CHECK_THROWS_AS(ModelSpec(th * Expr::time(), c(0), c(1), c(1), 0.5, 1.5, 1, 1, 0.01,
                            ThetaLocation::InF),
                  AssumptionError);
  // a decreasing in theta
  CHECK_THROWS_AS(ModelSpec(c(1), c(2) + c(-1) * th, c(1), c(1), 0.5, 1.5, 1, 1, 0.01,
                            ThetaLocation::InA),
                  AssumptionError);
  CHECK_NOTHROW(ModelSpec(th * Expr::time(), c(0), c(1), c(1), 0.5, 1.5, 1, 1, 0.01,
                          ThetaLocation::InF, false));
}

TEST_CASE("checked coefficient evaluation") {
  const ModelSpec m = fx::ex1();
  CHECK(m.eval_coeff(Coefficient::F, 1.2, 0.5) == 1.2);
  CHECK(m.eval_coeff(Coefficient::FDot, 1.2, 0.5) == 1.0);
  CHECK_THROWS_AS(m.eval_coeff(Coefficient::F, 2.0, 0.5), InputError);
  CHECK_THROWS_AS(m.eval_coeff(Coefficient::F, 1.0, 1.5), InputError);
  CHECK(m.project(7.0) == 1.5);
  CHECK(m.project(-1.0) == 0.5);
}

TEST_CASE("model json round trip and file errors") {
  const ModelSpec m = fx::rich();
  const ModelSpec back = ModelSpec::from_json(m.to_json());
  CHECK(back.f()(1.1, 0.3) == m.f()(1.1, 0.3));
  CHECK(back.sigma()(1.1, 0.3) == m.sigma()(1.1, 0.3));
  CHECK(back.theta_location() == m.theta_location());
  auto j = m.to_json();
  j.erase("b");
  CHECK_THROWS_AS(ModelSpec::from_json(j), InputError);
  CHECK_THROWS_AS(ModelSpec::load("/nonexistent/model.json"), InputError);
  const auto tmp = std::filesystem::temp_directory_path() / "kbos_bad_model.json";
  std::ofstream(tmp) << "{ not json";
  CHECK_THROWS_AS(ModelSpec::load(tmp), InputError);
  std::filesystem::remove(tmp);
}

TEST_CASE("toy limit system matches closed forms") {
  const ModelSpec m = fx::toy();
  const TimeGrid g(1000, 1.0);
  for (double th : {0.5, 1.0, 1.5}) {
    const auto lim = limit_system(m, th, g);
    for (std::size_t k : {0, 100, 500, 1000}) {
      const double t = g.node(k);
      CHECK(lim.y[k] == 1.0);
      CHECK(lim.x[k] == doctest::Approx(th * t).epsilon(1e-14));
      CHECK(lim.ydot[k] == doctest::Approx(oracle::toy_ydot(th, t)).epsilon(1e-9));
      CHECK(lim.Mdot[k] == doctest::Approx(oracle::toy_Mdot(th, t)).epsilon(1e-9));
      CHECK(lim.fisher_cum[k] == doctest::Approx(oracle::toy_fisher(th, t)).epsilon(1e-6));
    }
  }
}

TEST_CASE("time-varying limit system matches an adaptive ODE solve") {
  const ModelSpec m = fx::rich();
  const TimeGrid g(2000, 1.0);
  for (double th : {0.6, 1.3}) {
    const auto lim = limit_system(m, th, g);
    for (std::size_t k : {400, 1000, 2000}) {
      const auto ref = oracle::limit(fx::rich_oracle(), th, m.y0(), g.node(k));
      CHECK(lim.x[k] == doctest::Approx(ref.x).epsilon(1e-10));
      CHECK(lim.y[k] == doctest::Approx(ref.y).epsilon(1e-10));
      CHECK(lim.ydot[k] == doctest::Approx(ref.ydot).epsilon(1e-9));
      CHECK(lim.fisher_cum[k] == doctest::Approx(ref.fisher).epsilon(1e-6));
    }
  }
}

TEST_CASE("Fisher information converges at second order under refinement") {
  const ModelSpec m = fx::rich();
  const auto ref = oracle::limit(fx::rich_oracle(), 1.1, m.y0(), 1.0);
  double prev = 0.0;
  for (std::size_t n : {25, 50, 100, 200}) {
    const double err =
        std::abs(limit_system(m, 1.1, TimeGrid(n, 1.0)).fisher_cum.back() - ref.fisher);
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 1.9);
    prev = err;
  }
}

TEST_CASE("ydot equals its kernel representation") {
  // ydot(t) = int_0^t exp(int_s^t (a - D f)) (a_dot - D f_dot) y ds, integrated
  // independently as L = int (a - D f) and J = int exp(-L) (a_dot - D f_dot) y.
  const ModelSpec m = fx::rich();
  const auto o = fx::rich_oracle();
  const double th = 0.9;
  using State = std::array<double, 4>;  // y, gamma, L, J
  auto rhs = [&](const State& u, State& du, double t) {
    const double f = o.f(th, t), a = o.a(th, t), s = o.sigma(th, t), b = o.b(th, t);
    const double D = u[1] * f / (s * s);
    du[0] = a * u[0];
    du[1] = 2 * a * u[1] - u[1] * u[1] * f * f / (s * s) + b * b;
    du[2] = a - D * f;
    du[3] = std::exp(-u[2]) * (o.a_dot(th, t) - D * o.f_dot(th, t)) * u[0];
  };
  const TimeGrid g(1000, 1.0);
  const auto lim = limit_system(m, th, g);
  for (std::size_t k : {250, 1000}) {
    State s{m.y0(), 0.0, 0.0, 0.0};
    namespace ode = boost::numeric::odeint;
    ode::integrate_adaptive(
        ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<State>()), rhs, s, 0.0,
        g.node(k), 1e-4);
    CHECK(lim.ydot[k] == doctest::Approx(std::exp(s[2]) * s[3]).epsilon(1e-9));
  }
}

TEST_CASE("fisher window") {
  const ModelSpec m = fx::toy();
  const TimeGrid g(10000, 1.0);
  const auto lim = limit_system(m, 1.0, g);
  CHECK(fisher_window(lim, 0.1, 1.0) ==
        doctest::Approx(std::tanh(1.0) - std::tanh(0.1)).epsilon(1e-7));
  const double whole = fisher_window(lim, 0.0, 1.0);
  const double split = fisher_window(lim, 0.0, 0.3) + fisher_window(lim, 0.3, 1.0);
  CHECK(std::abs(whole - split) <= 4 * std::numeric_limits<double>::epsilon() * whole);
  for (std::size_t k = 1; k < lim.fisher_cum.size(); ++k)
    CHECK(lim.fisher_cum[k] >= lim.fisher_cum[k - 1]);
  CHECK_THROWS_AS(fisher_window(lim, 0.5, 0.5), InputError);
  CHECK_THROWS_AS(fisher_window(lim, 0.6, 0.5), InputError);
  CHECK_THROWS_AS(fisher_window(lim, 0.0, 1.5), InputError);
}

TEST_CASE("theta-free model carries no information") {
  const ModelSpec m(c(1), c(1), c(1), c(1), 0.5, 1.5, 1, 1, 0.01, ThetaLocation::InF, false);
  const auto lim = limit_system(m, 1.0, TimeGrid(100, 1.0));
  CHECK(fisher_window(lim, 0.2, 1.0) == 0.0);
}

TEST_CASE("limit overflow reports a numerical error") {
  const ModelSpec m(Expr::theta(), c(800), c(1), c(1), 0.5, 1.5, 1, 1, 0.01,
                    ThetaLocation::InF);
  CHECK_THROWS_AS(limit_system(m, 1.0, TimeGrid(1000, 1.0)), NumericalError);
}

TEST_CASE("interpolation between nodes") {
  const TimeGrid g(4, 1.0);
  const std::vector<double> v{0, 1, 2, 3, 4};
  CHECK(interpolate(g, v, 0.375) == doctest::Approx(1.5));
  CHECK(interpolate(g, v, 1.0) == 4.0);
  CHECK_THROWS_AS(interpolate(g, {1, 2}, 0.5), InputError);
}

TEST_CASE("limit point agrees with the grid solution") {
  const ModelSpec m = fx::rich();
  const TimeGrid g(1000, 1.0);
  const auto lim = limit_system(m, 1.2, g);
  const auto p = limit_point(m, 1.2, g.node(300), 300);
  CHECK(p.x == doctest::Approx(lim.x[300]).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(lim.y[300]).epsilon(1e-12));
}
