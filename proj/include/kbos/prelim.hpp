#pragma once

#include <cstddef>
#include <string>

#include "kbos/model.hpp"
#include "kbos/simulate.hpp"

namespace kbos {

// What the learning interval feeds. Together with the model's
// ThetaLocation this fixes the admissible range of delta:
//   theta in f:  preliminary (0, 2),   one-step (0, 1)
//   theta in a:  preliminary (0, 2/3), one-step (0, 1/3)
enum class Downstream { Preliminary, OneStep };

struct DeltaRange {
  double lo;
  double hi;
  std::string reason;
};

DeltaRange admissible_delta(ThetaLocation where, Downstream use);

// tau_eps = eps^delta, capped at T/2.
double learning_interval(double eps, double delta, double horizon,
                         ThetaLocation where, Downstream use);

enum class PrelimBranch { ClampedLow, Interior, ClampedHigh };

std::string to_string(PrelimBranch b);

struct PrelimResult {
  double theta_bar = 0.0;
  double tau_eps = 0.0;        // snapped to the grid node actually used
  std::size_t tau_index = 0;   // grid index of tau_eps
  PrelimBranch branch = PrelimBranch::Interior;
  int solver_iters = 0;

  bool clamped() const { return branch != PrelimBranch::Interior; }
};

// Grid node used for a requested learning interval: nearest node, at least 1.
std::size_t learning_index(const TimeGrid& grid, double tau_eps);

// Inversion of the noise-free map theta -> x_tau(theta) at the observed
// X_tau, clamped to [alpha, beta] outside the attainable range.
PrelimResult estimate_generic(const ModelSpec& model, const Trajectory& traj,
                              double tau_eps);

// f(theta, t) = theta f_t with a theta-free:
//   theta_bar = X_tau / int_0^tau f_s y_s ds.
PrelimResult estimate_example1(const ModelSpec& model, const Trajectory& traj,
                               double tau_eps);

// f theta-free, a(theta, t) = theta a_t:
//   theta_bar = 2 (X_tau - y0 int_0^tau f_s ds) / (f_0 a_0 y0 tau^2).
PrelimResult estimate_example2(const ModelSpec& model, const Trajectory& traj,
                               double tau_eps);

enum class PrelimMethod { Generic, Example1, Example2 };

PrelimMethod parse_prelim_method(const std::string& name);
std::string to_string(PrelimMethod m);

PrelimResult estimate_prelim(PrelimMethod method, const ModelSpec& model,
                             const Trajectory& traj, double tau_eps);

}  // namespace kbos
