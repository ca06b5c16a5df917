#pragma once

#include <cstdint>
#include <vector>

#include "kbos/model.hpp"

namespace kbos {

// Discretized sample path of (X, Y) on a grid. X[0] = 0, Y[0] = y0.
struct Trajectory {
  TimeGrid grid;
  std::vector<double> X;
  std::vector<double> Y;
  std::uint64_t seed = 0;
  double theta_true = 0.0;
  double eps = 0.0;
};

// RNG substreams per seed: hidden-state noise V and observation noise W.
inline constexpr std::uint32_t kStreamV = 0;
inline constexpr std::uint32_t kStreamW = 1;

// Euler-Maruyama simulator with the coefficients at (theta0, t_k)
// precomputed, so many seeds can share one instance.
class PathSimulator {
 public:
  PathSimulator(const ModelSpec& model, double theta0, const TimeGrid& grid);

  // Path on the first `last_index` steps of the grid (the full grid when
  // last_index == n_steps). Shorter paths are bitwise prefixes of longer ones.
  Trajectory operator()(std::uint64_t seed, std::size_t last_index) const;
  Trajectory operator()(std::uint64_t seed) const {
    return (*this)(seed, grid_.n_steps());
  }

  const TimeGrid& grid() const { return grid_; }

 private:
  TimeGrid grid_;
  double theta0_;
  double y0_;
  double eps_;
  std::vector<double> drift_x_;   // f(theta0, t_k)
  std::vector<double> drift_y_;   // a(theta0, t_k)
  std::vector<double> vol_x_;     // eps sigma(t_k) sqrt(h)
  std::vector<double> vol_y_;     // eps b(t_k) sqrt(h)
};

// Euler-Maruyama path of the observed and hidden processes at theta0.
// Identical inputs give bit-identical paths.
Trajectory simulate_path(const ModelSpec& model, double theta0,
                         const TimeGrid& grid, std::uint64_t seed);

// Same path restricted to the first `last_index` steps (a bitwise prefix of
// the full path); used when only the learning interval is needed.
Trajectory simulate_prefix(const ModelSpec& model, double theta0,
                           const TimeGrid& grid, std::uint64_t seed,
                           std::size_t last_index);

// First `last_index` steps of a path.
Trajectory truncate(const Trajectory& traj, std::size_t last_index);

struct MomentProbeRow {
  double tau;
  double mean_sq;  // empirical E|X_tau - x_tau(theta0)|^2 / eps^2
  double stderr_;  // Monte Carlo standard error of mean_sq
};

// Second moment of eta_tau = (X_tau - x_tau(theta0)) / eps for each tau,
// over seeds base_seed, ..., base_seed + n_rep - 1.
std::vector<MomentProbeRow> moment_scaling_probe(const ModelSpec& model,
                                                 double theta0,
                                                 const TimeGrid& grid,
                                                 const std::vector<double>& taus,
                                                 std::size_t n_rep,
                                                 std::uint64_t base_seed);

}  // namespace kbos
