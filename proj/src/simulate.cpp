#include "kbos/simulate.hpp"

#include <cmath>
#include <string>

#include "kbos/error.hpp"
#include "kbos/rng.hpp"

namespace kbos {

namespace {

void check_theta0(const ModelSpec& model, double theta0) {
  if (!(theta0 > model.alpha() && theta0 < model.beta())) {
    throw InputError("true parameter " + std::to_string(theta0) +
                     " must lie inside (alpha, beta)");
  }
}

}  // namespace

PathSimulator::PathSimulator(const ModelSpec& model, double theta0,
                             const TimeGrid& grid)
    : grid_(grid), theta0_(theta0), y0_(model.y0()), eps_(model.eps()) {
  check_theta0(model, theta0);
  const std::size_t n = grid.n_steps();
  const double sqrt_h = std::sqrt(grid.step());
  drift_x_.resize(n);
  drift_y_.resize(n);
  vol_x_.resize(n);
  vol_y_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid.node(k);
    drift_x_[k] = model.f()(theta0, t);
    drift_y_[k] = model.a()(theta0, t);
    vol_x_[k] = eps_ * model.sigma()(theta0, t) * sqrt_h;
    vol_y_[k] = eps_ * model.b()(theta0, t) * sqrt_h;
  }
}

Trajectory PathSimulator::operator()(std::uint64_t seed,
                                     std::size_t last_index) const {
  const TimeGrid sub =
      last_index == grid_.n_steps() ? grid_ : grid_.prefix(last_index);
  const std::size_t n = sub.n_steps();
  const double h = grid_.step();

  Trajectory path{sub, std::vector<double>(n + 1), std::vector<double>(n + 1),
                  seed, theta0_, eps_};
  NormalStream xi(seed, kStreamV);
  NormalStream eta(seed, kStreamW);

  double x = 0.0;
  double y = y0_;
  path.X[0] = x;
  path.Y[0] = y;
  for (std::size_t k = 0; k < n; ++k) {
    const double dv = xi();
    const double dw = eta();
    const double y_next = y + drift_y_[k] * y * h + vol_y_[k] * dv;
    x += drift_x_[k] * y * h + vol_x_[k] * dw;
    y = y_next;
    path.X[k + 1] = x;
    path.Y[k + 1] = y;
  }
  if (!std::isfinite(x) || !std::isfinite(y)) {
    throw NumericalError("simulated path diverged");
  }
  return path;
}

Trajectory simulate_prefix(const ModelSpec& model, double theta0,
                           const TimeGrid& grid, std::uint64_t seed,
                           std::size_t last_index) {
  return PathSimulator(model, theta0, grid)(seed, last_index);
}

Trajectory simulate_path(const ModelSpec& model, double theta0,
                         const TimeGrid& grid, std::uint64_t seed) {
  return simulate_prefix(model, theta0, grid, seed, grid.n_steps());
}

Trajectory truncate(const Trajectory& traj, std::size_t last_index) {
  if (last_index == traj.grid.n_steps()) return traj;
  Trajectory out{traj.grid.prefix(last_index),
                 {traj.X.begin(), traj.X.begin() + static_cast<long>(last_index + 1)},
                 {traj.Y.begin(), traj.Y.begin() + static_cast<long>(last_index + 1)},
                 traj.seed, traj.theta_true, traj.eps};
  return out;
}

std::vector<MomentProbeRow> moment_scaling_probe(const ModelSpec& model,
                                                 double theta0,
                                                 const TimeGrid& grid,
                                                 const std::vector<double>& taus,
                                                 std::size_t n_rep,
                                                 std::uint64_t base_seed) {
  if (n_rep < 2) throw InputError("moment probe needs at least 2 replications");
  if (!(model.eps() > 0.0)) throw InputError("moment probe needs eps > 0");
  std::size_t last = 0;
  std::vector<std::size_t> idx;
  for (double tau : taus) {
    if (!(tau > 0.0 && tau <= grid.horizon())) {
      throw InputError("probe times must lie in (0, T]");
    }
    idx.push_back(std::max<std::size_t>(1, grid.nearest_index(tau)));
    last = std::max(last, idx.back());
  }
  const auto limit = limit_system(model, theta0, grid);
  const PathSimulator simulate(model, theta0, grid);

  std::vector<double> sum(taus.size(), 0.0), sum_sq(taus.size(), 0.0);
  for (std::size_t r = 0; r < n_rep; ++r) {
    const auto path = simulate(base_seed + r, last);
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const double eta = (path.X[idx[i]] - limit.x[idx[i]]) / model.eps();
      sum[i] += eta * eta;
      sum_sq[i] += eta * eta * eta * eta;
    }
  }
  std::vector<MomentProbeRow> rows;
  const double n = static_cast<double>(n_rep);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double mean = sum[i] / n;
    const double var = (sum_sq[i] - n * mean * mean) / (n - 1.0);
    rows.push_back({grid.node(idx[i]), mean, std::sqrt(std::max(var, 0.0) / n)});
  }
  return rows;
}

}  // namespace kbos
