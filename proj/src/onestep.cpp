#include "kbos/onestep.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kbos/error.hpp"
#include "kbos/kbfilter.hpp"

namespace kbos {

namespace {

// Score weights Mdot_k / sigma_k^2 and the cumulative information, both at
// theta_bar on the trajectory grid.
struct ScoreInputs {
  std::vector<double> weight;
  std::vector<double> fisher_cum;
  std::vector<double> f;
  FilterOutput filter;
};

ScoreInputs score_inputs(const ModelSpec& model, const Trajectory& traj,
                         double theta_bar, ScoreForm form) {
  if (traj.X.size() != traj.grid.size()) {
    throw InputError("trajectory length does not match its grid");
  }
  if (form == ScoreForm::ThetaFreeObservation && model.f().depends_on_theta()) {
    throw InputError("theta-free score form needs f independent of theta");
  }
  const auto limit = limit_system(model, theta_bar, traj.grid);
  const std::size_t n = traj.grid.size();
  ScoreInputs in{{}, {}, {}, KalmanBucyFilter(model, theta_bar, traj.grid).run(traj)};
  in.weight.resize(n);
  in.f.resize(n);
  std::vector<double> Mdot(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = model.f()(theta_bar, traj.grid.node(k));
    in.f[k] = f;
    Mdot[k] = form == ScoreForm::General ? limit.Mdot[k] : f * limit.ydot[k];
    in.weight[k] = Mdot[k] / (limit.sigma[k] * limit.sigma[k]);
  }
  in.fisher_cum = form == ScoreForm::General
                      ? limit.fisher_cum
                      : cumulative_fisher(Mdot, limit.sigma, traj.grid.step());
  return in;
}

// Score increment over [t_k, t_{k+1}].
double score_step(const ScoreInputs& in, const Trajectory& traj, std::size_t k) {
  const double h = traj.grid.step();
  const double dX = traj.X[k + 1] - traj.X[k];
  return in.weight[k] * (dX - in.f[k] * in.filter.m[k] * h);
}

void check_prelim(const Trajectory& traj, const PrelimResult& prelim) {
  if (prelim.tau_index == 0 || prelim.tau_index >= traj.grid.n_steps()) {
    throw InputError("learning interval must end strictly inside the horizon");
  }
  if (!std::isfinite(prelim.theta_bar)) {
    throw InputError("preliminary estimate is not finite");
  }
}

// Last process value at or before node k, or theta_bar before the first.
double process_value(const EstimatorProcess& process, std::size_t k) {
  auto it = std::upper_bound(process.index.begin(), process.index.end(), k);
  if (it == process.index.begin()) return process.theta_bar;
  return process.theta_star_t[static_cast<std::size_t>(it - process.index.begin()) - 1];
}

}  // namespace

double fisher_floor(const ModelSpec& model, const TimeGrid& grid) {
  double s2 = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double s = model.sigma()(0.0, grid.node(k));
    s2 += s * s;
  }
  s2 /= static_cast<double>(grid.size());
  return 1e-12 * grid.horizon() / s2;
}

const double* EstimatorProcess::at_index(std::size_t k) const {
  auto it = std::lower_bound(index.begin(), index.end(), k);
  if (it == index.end() || *it != k) return nullptr;
  return &theta_star_t[static_cast<std::size_t>(it - index.begin())];
}

OneStepResult one_step_mle(const ModelSpec& model, const Trajectory& traj,
                           const PrelimResult& prelim, ScoreForm form) {
  check_prelim(traj, prelim);
  const auto in = score_inputs(model, traj, prelim.theta_bar, form);
  const std::size_t n = traj.grid.n_steps();
  const std::size_t k0 = prelim.tau_index;

  double score = 0.0;
  for (std::size_t k = k0; k < n; ++k) score += score_step(in, traj, k);
  const double fisher = in.fisher_cum[n] - in.fisher_cum[k0];
  if (!(fisher > fisher_floor(model, traj.grid))) {
    throw SingularInformationError("Fisher information I_tau(theta_bar) = " +
                                   std::to_string(fisher) + " is below the floor");
  }
  if (!std::isfinite(score)) throw NumericalError("score integral not finite");

  OneStepResult out;
  out.theta_bar = prelim.theta_bar;
  out.correction = score;
  out.fisher_used = fisher;
  out.theta_star = prelim.theta_bar + score / fisher;
  out.prelim_clamped = prelim.clamped();
  return out;
}

EstimatorProcess one_step_process(const ModelSpec& model, const Trajectory& traj,
                                  const PrelimResult& prelim, ScoreForm form) {
  check_prelim(traj, prelim);
  const auto in = score_inputs(model, traj, prelim.theta_bar, form);
  const std::size_t n = traj.grid.n_steps();
  const std::size_t k0 = prelim.tau_index;
  const double floor = fisher_floor(model, traj.grid);

  EstimatorProcess out{traj.grid, prelim.theta_bar, k0, prelim.clamped(),
                       {}, {}, {}, {}, {}};
  double score = 0.0;
  for (std::size_t k = k0; k < n; ++k) {
    score += score_step(in, traj, k);
    const double fisher = in.fisher_cum[k + 1] - in.fisher_cum[k0];
    if (!(fisher > floor)) continue;
    out.index.push_back(k + 1);
    out.t.push_back(traj.grid.node(k + 1));
    out.theta_star_t.push_back(prelim.theta_bar + score / fisher);
    out.fisher_t.push_back(fisher);
    out.correction_t.push_back(score);
  }
  if (out.index.empty() || out.index.back() != n) {
    throw SingularInformationError(
        "Fisher information I_tau(theta_bar) is below the floor");
  }
  if (!std::isfinite(score)) throw NumericalError("score integral not finite");
  return out;
}

AdaptiveFilterOutput adaptive_filter(const ModelSpec& model,
                                     const Trajectory& traj,
                                     const EstimatorProcess& process,
                                     AdaptiveInit init) {
  if (!(process.grid == traj.grid)) {
    throw InputError("estimator-process grid does not match the trajectory");
  }
  const std::size_t n = traj.grid.n_steps();
  const std::size_t k0 = process.tau_index;
  const double h = traj.grid.step();

  // Warm-up on [0, tau] with the preliminary estimate.
  const auto warm = KalmanBucyFilter(model, process.theta_bar, traj.grid.prefix(k0))
                        .run(truncate(traj, k0));

  AdaptiveFilterOutput out{traj.grid, k0, std::vector<double>(n + 1),
                           std::vector<double>(n + 1), std::vector<double>(n + 1)};
  const double theta_warm = model.project(process.theta_bar);
  for (std::size_t k = 0; k <= k0; ++k) {
    out.m_star[k] = warm.m[k];
    out.gamma_star_adaptive[k] = warm.gamma_star[k];
    out.theta_used[k] = theta_warm;
  }

  double m = warm.m[k0];
  double g = init == AdaptiveInit::WarmStart ? warm.gamma_star[k0] : 0.0;
  out.gamma_star_adaptive[k0] = g;
  for (std::size_t k = k0; k < n; ++k) {
    const double th = model.project(process_value(process, k));
    const auto c0 = model.coeffs(th, traj.grid.node(k));
    const auto cm = model.coeffs(th, traj.grid.midpoint(k));
    const auto c1 = model.coeffs(th, traj.grid.node(k + 1));
    out.theta_used[k] = th;

    const double D = g * c0.f * (1.0 / (c0.sigma * c0.sigma));
    const double dX = traj.X[k + 1] - traj.X[k];
    m += (c0.a - D * c0.f) * m * h + D * dX;

    const double k1 = riccati_rhs(g, c0);
    const double k2 = riccati_rhs(g + 0.5 * h * k1, cm);
    const double k3 = riccati_rhs(g + 0.5 * h * k2, cm);
    const double k4 = riccati_rhs(g + h * k3, c1);
    g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    if (!std::isfinite(m) || !std::isfinite(g)) {
      throw NumericalError("adaptive filter diverged at node " +
                           std::to_string(k + 1));
    }
    out.m_star[k + 1] = m;
    out.gamma_star_adaptive[k + 1] = g;
  }
  out.theta_used[n] = model.project(process_value(process, n));
  return out;
}

namespace {

struct RobustParts {
  double NG;      // N(t) G, scaled to avoid overflow
  double log_N;   // int_0^t (a - D f) ds
};

RobustParts robust_parts(const ModelSpec& model, double theta,
                         const Trajectory& traj, std::size_t lo, std::size_t hi) {
  const auto& grid = traj.grid;
  const double h = grid.step();
  const auto window = grid.prefix(hi);
  const auto table = tabulate(model, theta, window);
  const auto ric = solve_riccati(table, window);

  // L_k = int_0^{t_k} (a - D f) and P = Q' - Q (a - D f) with Q = D.
  std::vector<double> L(hi + 1), P(hi + 1);
  double prev_rate = 0.0;
  for (std::size_t k = 0; k <= hi; ++k) {
    const auto& c = table.at_node(k);
    const double g = ric.gamma_star[k];
    const double D = ric.D[k];
    const double rate = c.a - D * c.f;
    const double s2 = c.sigma * c.sigma;
    const double g_prime = riccati_rhs(g, c);
    const double Q_prime = (g_prime * c.f + g * c.f_prime) / s2 -
                           2.0 * g * c.f * c.sigma_prime / (s2 * c.sigma);
    P[k] = Q_prime - D * rate;
    L[k] = k == 0 ? 0.0 : L[k - 1] + 0.5 * h * (prev_rate + rate);
    prev_rate = rate;
  }

  const double Lt = L[hi];
  double integral = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    const double u0 = P[k] * std::exp(Lt - L[k]) * traj.X[k];
    const double u1 = P[k + 1] * std::exp(Lt - L[k + 1]) * traj.X[k + 1];
    integral += 0.5 * h * (u0 + u1);
  }
  const double NG = ric.D[hi] * traj.X[hi] -
                    ric.D[lo] * traj.X[lo] * std::exp(Lt - L[lo]) - integral;
  if (!std::isfinite(NG) || !std::isfinite(Lt)) {
    throw NumericalError("robust integral not finite at theta=" +
                         std::to_string(theta));
  }
  return {NG, Lt};
}

std::size_t checked_index(const TimeGrid& grid, double t, const char* what) {
  const std::size_t k = grid.nearest_index(t);
  if (std::abs(grid.node(k) - t) > 1e-9 * grid.horizon()) {
    throw InputError(std::string(what) + " must be a grid node");
  }
  return k;
}

}  // namespace

double robust_integral_G(const ModelSpec& model, double theta,
                         const Trajectory& traj, double lower, double t) {
  const std::size_t lo = checked_index(traj.grid, lower, "lower limit");
  const std::size_t hi = checked_index(traj.grid, t, "upper limit");
  if (!(lo < hi)) throw InputError("robust integral needs lower < t");
  const auto parts = robust_parts(model, model.project(theta), traj, lo, hi);
  const double G = parts.NG * std::exp(-parts.log_N);
  if (!std::isfinite(G)) {
    throw NumericalError("G underflow/overflow; N = exp(" +
                         std::to_string(parts.log_N) + ")");
  }
  return G;
}

MStarResult conditional_mean_robust(const ModelSpec& model, double theta,
                                    const Trajectory& traj, double t) {
  const std::size_t hi = checked_index(traj.grid, t, "evaluation time");
  const double th = model.project(theta);
  MStarResult out;
  out.t = traj.grid.node(hi);
  out.theta = th;
  if (hi == 0) {
    out.m_star = model.y0();
    out.N_val = 1.0;
    out.G_val = 0.0;
    return out;
  }
  const auto parts = robust_parts(model, th, traj, 0, hi);
  out.N_val = std::exp(parts.log_N);
  out.G_val = parts.NG * std::exp(-parts.log_N);
  out.m_star = model.y0() * out.N_val + parts.NG;
  if (!std::isfinite(out.m_star)) {
    throw NumericalError("m* not finite at t=" + std::to_string(out.t));
  }
  return out;
}

MStarResult m_star(const ModelSpec& model, const Trajectory& traj,
                   const EstimatorProcess& process, double t) {
  const std::size_t k = checked_index(traj.grid, t, "evaluation time");
  if (k <= process.tau_index) {
    throw InputError("m* needs t beyond the learning interval");
  }
  return conditional_mean_robust(model, process_value(process, k), traj, t);
}

}  // namespace kbos
