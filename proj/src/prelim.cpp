#include "kbos/prelim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kbos/error.hpp"

namespace kbos {

namespace {

constexpr std::size_t kMinLearningNodes = 100;
constexpr std::size_t kMonotoneProbes = 9;

std::size_t sub_steps(std::size_t tau_index) {
  return std::max(kMinLearningNodes, tau_index);
}

PrelimResult clamp_result(const ModelSpec& model, double value, double tau,
                          std::size_t tau_index) {
  PrelimResult r;
  r.tau_eps = tau;
  r.tau_index = tau_index;
  if (!(value > model.alpha())) {
    r.theta_bar = model.alpha();
    r.branch = PrelimBranch::ClampedLow;
  } else if (!(value < model.beta())) {
    r.theta_bar = model.beta();
    r.branch = PrelimBranch::ClampedHigh;
  } else {
    r.theta_bar = value;
    r.branch = PrelimBranch::Interior;
  }
  return r;
}

void check_tau(const Trajectory& traj, std::size_t tau_index) {
  if (tau_index > traj.grid.n_steps()) {
    throw InputError("learning interval exceeds the trajectory horizon");
  }
}

}  // namespace

DeltaRange admissible_delta(ThetaLocation where, Downstream use) {
  if (where == ThetaLocation::InF) {
    if (use == Downstream::Preliminary) {
      return {0.0, 2.0, "consistency of the preliminary estimator (theta in f)"};
    }
    return {0.0, 1.0, "efficiency of the one-step estimator (theta in f)"};
  }
  if (use == Downstream::Preliminary) {
    return {0.0, 2.0 / 3.0,
            "consistency of the preliminary estimator (theta in a)"};
  }
  return {0.0, 1.0 / 3.0, "efficiency of the one-step estimator (theta in a)"};
}

double learning_interval(double eps, double delta, double horizon,
                         ThetaLocation where, Downstream use) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw InputError("learning interval needs eps in (0, 1)");
  }
  const auto range = admissible_delta(where, use);
  if (!(delta > range.lo && delta < range.hi)) {
    std::ostringstream os;
    os << "delta=" << delta << " outside (" << range.lo << ", " << range.hi
       << ") required for " << range.reason;
    throw InputError(os.str());
  }
  return std::min(std::pow(eps, delta), 0.5 * horizon);
}

std::string to_string(PrelimBranch b) {
  switch (b) {
    case PrelimBranch::ClampedLow: return "clamped_low";
    case PrelimBranch::Interior: return "interior";
    case PrelimBranch::ClampedHigh: return "clamped_high";
  }
  return "?";
}

std::size_t learning_index(const TimeGrid& grid, double tau_eps) {
  if (!(tau_eps > 0.0)) throw InputError("learning interval must be positive");
  return std::max<std::size_t>(1, grid.nearest_index(tau_eps));
}

PrelimResult estimate_generic(const ModelSpec& model, const Trajectory& traj,
                              double tau_eps) {
  const std::size_t kt = learning_index(traj.grid, tau_eps);
  check_tau(traj, kt);
  const double tau = traj.grid.node(kt);
  const std::size_t n_sub = sub_steps(kt);
  const double observed = traj.X[kt];
  auto x_at = [&](double th) { return limit_point(model, th, tau, n_sub).x; };

  // The limit map must be strictly monotone on [alpha, beta].
  std::vector<double> probe(kMonotoneProbes);
  for (std::size_t i = 0; i < kMonotoneProbes; ++i) {
    const double th = model.alpha() + (model.beta() - model.alpha()) *
                                          static_cast<double>(i) /
                                          (kMonotoneProbes - 1);
    probe[i] = x_at(th);
  }
  const bool increasing = probe.back() > probe.front();
  for (std::size_t i = 1; i < kMonotoneProbes; ++i) {
    const double d = probe[i] - probe[i - 1];
    if (increasing ? !(d > 0.0) : !(d < 0.0)) {
      throw AssumptionError(
          "x_tau(theta) is not monotone on [alpha, beta] at tau=" +
          std::to_string(tau));
    }
  }

  const double x_lo = probe.front();
  const double x_hi = probe.back();
  // Decreasing maps swap which boundary a low observation clamps to.
  const double x_min = std::min(x_lo, x_hi);
  const double x_max = std::max(x_lo, x_hi);
  PrelimResult r;
  r.tau_eps = tau;
  r.tau_index = kt;
  if (observed <= x_min) {
    r.branch = increasing ? PrelimBranch::ClampedLow : PrelimBranch::ClampedHigh;
    r.theta_bar = increasing ? model.alpha() : model.beta();
    return r;
  }
  if (observed >= x_max) {
    r.branch = increasing ? PrelimBranch::ClampedHigh : PrelimBranch::ClampedLow;
    r.theta_bar = increasing ? model.beta() : model.alpha();
    return r;
  }

  double lo = model.alpha();
  double hi = model.beta();
  const double tol = 1e-12 * (model.beta() - model.alpha());
  int iters = 0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double g = x_at(mid) - observed;
    ++iters;
    if ((g < 0.0) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (iters > 200) break;
  }
  r.theta_bar = 0.5 * (lo + hi);
  r.branch = PrelimBranch::Interior;
  r.solver_iters = iters;
  // Bisection can land on the bracket end when X_tau sits within tol of it.
  if (r.theta_bar <= model.alpha()) {
    r.theta_bar = model.alpha();
    r.branch = PrelimBranch::ClampedLow;
  } else if (r.theta_bar >= model.beta()) {
    r.theta_bar = model.beta();
    r.branch = PrelimBranch::ClampedHigh;
  }
  return r;
}

PrelimResult estimate_example1(const ModelSpec& model, const Trajectory& traj,
                               double tau_eps) {
  if (model.a().depends_on_theta()) {
    throw AssumptionError("example-1 estimator needs a theta-free state drift");
  }
  // f(theta, t) = theta f_t: the theta-derivative is f_t and f - theta f_t = 0.
  const Expr& f_unit = model.f_dot();
  if (f_unit.depends_on_theta()) {
    throw AssumptionError("example-1 estimator needs f linear in theta");
  }
  for (double th : {model.alpha(), 0.5 * (model.alpha() + model.beta()), model.beta()}) {
    for (double t : {0.0, 0.5 * model.horizon(), model.horizon()}) {
      const double fv = model.f()(th, t);
      if (std::abs(fv - th * f_unit(th, t)) > 1e-12 * (1.0 + std::abs(fv))) {
        throw AssumptionError("example-1 estimator needs f = theta * f_t");
      }
    }
  }
  const std::size_t kt = learning_index(traj.grid, tau_eps);
  check_tau(traj, kt);
  const double tau = traj.grid.node(kt);

  // int_0^tau f_t y_t dt with y from the theta-free state equation.
  const std::size_t n_sub = sub_steps(kt);
  const double h = tau / static_cast<double>(n_sub);
  double z = 0.0;
  double y = model.y0();
  const Expr& a = model.a();
  for (std::size_t k = 0; k < n_sub; ++k) {
    const double t0 = static_cast<double>(k) * h;
    const double tm = t0 + 0.5 * h;
    const double t1 = t0 + h;
    const double ky1 = a(0.0, t0) * y;
    const double y2 = y + 0.5 * h * ky1;
    const double ky2 = a(0.0, tm) * y2;
    const double y3 = y + 0.5 * h * ky2;
    const double ky3 = a(0.0, tm) * y3;
    const double y4 = y + h * ky3;
    const double ky4 = a(0.0, t1) * y4;
    z += h / 6.0 *
         (f_unit(0.0, t0) * y + 2.0 * f_unit(0.0, tm) * y2 +
          2.0 * f_unit(0.0, tm) * y3 + f_unit(0.0, t1) * y4);
    y += h / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4);
  }
  if (!(std::abs(z) > 1e-300)) {
    throw AssumptionError("example-1 estimator: degenerate denominator");
  }
  return clamp_result(model, traj.X[kt] / z, tau, kt);
}

PrelimResult estimate_example2(const ModelSpec& model, const Trajectory& traj,
                               double tau_eps) {
  if (model.f().depends_on_theta()) {
    throw AssumptionError("example-2 estimator needs a theta-free observation drift");
  }
  const Expr& a_unit = model.a_dot();
  if (a_unit.depends_on_theta()) {
    throw AssumptionError("example-2 estimator needs a linear in theta");
  }
  const double denom0 = model.f()(0.0, 0.0) * a_unit(0.0, 0.0) * model.y0();
  if (denom0 == 0.0) {
    throw AssumptionError(
        "example-2 estimator needs f(0) a(0) y0 != 0 (a_0 and da/dtheta at t=0 "
        "separated from zero)");
  }
  const std::size_t kt = learning_index(traj.grid, tau_eps);
  check_tau(traj, kt);
  const double tau = traj.grid.node(kt);

  // Simpson's rule for int_0^tau f_s ds; f is smooth and theta-free.
  const std::size_t n_sub = 2 * sub_steps(kt);
  const double h = tau / static_cast<double>(n_sub);
  double acc = model.f()(0.0, 0.0) + model.f()(0.0, tau);
  for (std::size_t k = 1; k < n_sub; ++k) {
    acc += (k % 2 == 1 ? 4.0 : 2.0) * model.f()(0.0, static_cast<double>(k) * h);
  }
  const double f_integral = acc * h / 3.0;
  const double value =
      2.0 * (traj.X[kt] - model.y0() * f_integral) / (denom0 * tau * tau);
  return clamp_result(model, value, tau, kt);
}

PrelimMethod parse_prelim_method(const std::string& name) {
  if (name == "generic") return PrelimMethod::Generic;
  if (name == "example1") return PrelimMethod::Example1;
  if (name == "example2") return PrelimMethod::Example2;
  throw InputError("unknown preliminary estimator '" + name +
                   "' (generic, example1, example2)");
}

std::string to_string(PrelimMethod m) {
  switch (m) {
    case PrelimMethod::Generic: return "generic";
    case PrelimMethod::Example1: return "example1";
    case PrelimMethod::Example2: return "example2";
  }
  return "?";
}

PrelimResult estimate_prelim(PrelimMethod method, const ModelSpec& model,
                             const Trajectory& traj, double tau_eps) {
  switch (method) {
    case PrelimMethod::Generic: return estimate_generic(model, traj, tau_eps);
    case PrelimMethod::Example1: return estimate_example1(model, traj, tau_eps);
    case PrelimMethod::Example2: return estimate_example2(model, traj, tau_eps);
  }
  throw InputError("unknown preliminary estimator");
}

}  // namespace kbos
