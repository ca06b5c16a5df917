#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "kbos/model.hpp"
#include "kbos/simulate.hpp"

namespace kbos {

// Rescaled Riccati right-hand side: 2 a g - g^2 f^2 / sigma^2 + b^2.
inline double riccati_rhs(double g, const CoeffValues& c) {
  return 2.0 * c.a * g - g * g * c.f * c.f / (c.sigma * c.sigma) + c.b * c.b;
}

// Theta-derivative of the Riccati right-hand side, for gdot = dg/dtheta.
inline double riccati_rhs_dtheta(double g, double gdot, const CoeffValues& c) {
  return 2.0 * c.a_dot * g + 2.0 * c.a * gdot -
         (2.0 * g * gdot * c.f * c.f + 2.0 * g * g * c.f * c.f_dot) /
             (c.sigma * c.sigma);
}

// gamma_star = gamma / eps^2 and the gain D = gamma_star f / sigma^2 on the
// grid nodes; with_derivative adds their theta-derivatives.
struct RiccatiSolution {
  std::vector<double> gamma_star;
  std::vector<double> D;
  std::vector<double> gamma_star_dot;  // empty unless requested
  std::vector<double> D_dot;           // empty unless requested
};

RiccatiSolution solve_riccati(const ModelSpec& model, double theta,
                              const TimeGrid& grid, bool with_derivative = false);
RiccatiSolution solve_riccati(const CoeffTable& table, const TimeGrid& grid,
                              bool with_derivative = false);

struct FilterOutput {
  TimeGrid grid;
  double theta = 0.0;
  std::vector<double> m;
  std::vector<double> gamma_star;
  std::vector<double> D;
  std::optional<std::vector<double>> mdot;
};

// Kalman-Bucy filter at a fixed theta on a fixed grid. Construction solves
// the Riccati equation once; run() is then a cheap pass over a path and the
// handle can be shared read-only between threads.
class KalmanBucyFilter {
 public:
  KalmanBucyFilter(const ModelSpec& model, double theta, const TimeGrid& grid,
                   bool with_derivative = false);

  // Filters traj, which must live on this grid or on a prefix of it.
  FilterOutput run(const Trajectory& traj) const;

  double theta() const { return theta_; }
  const TimeGrid& grid() const { return grid_; }
  const RiccatiSolution& riccati() const { return riccati_; }
  bool with_derivative() const { return with_derivative_; }
  // Coefficients at (theta, t_k).
  const CoeffValues& node(std::size_t k) const { return nodes_[k]; }

 private:
  TimeGrid grid_;
  double theta_;
  double y0_;
  bool with_derivative_;
  RiccatiSolution riccati_;
  std::vector<CoeffValues> nodes_;
};

FilterOutput run_filter(const ModelSpec& model, double theta,
                        const Trajectory& traj, bool with_derivative = false);

}  // namespace kbos
