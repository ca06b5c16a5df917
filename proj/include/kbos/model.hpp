#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbos/expr.hpp"

namespace kbos {

// Uniform grid on [0, T] with n_steps intervals.
class TimeGrid {
 public:
  TimeGrid(std::size_t n_steps, double horizon);

  std::size_t n_steps() const { return n_steps_; }
  std::size_t size() const { return n_steps_ + 1; }
  double step() const { return h_; }
  double horizon() const { return horizon_; }
  // t_k = k h, with t_n == T exactly.
  double node(std::size_t k) const;
  // Midpoint of [t_k, t_{k+1}].
  double midpoint(std::size_t k) const { return node(k) + 0.5 * h_; }

  // Nearest node to t; t must lie in [0, T].
  std::size_t nearest_index(double t) const;

  // The first k intervals of this grid, same step.
  TimeGrid prefix(std::size_t k) const;

  bool operator==(const TimeGrid& other) const {
    return n_steps_ == other.n_steps_ && h_ == other.h_ &&
           horizon_ == other.horizon_;
  }

 private:
  TimeGrid(std::size_t n_steps, double horizon, double h)
      : n_steps_(n_steps), horizon_(horizon), h_(h) {}

  std::size_t n_steps_;
  double horizon_;
  double h_;
};

// Which coefficient carries the parameter; selects the identifiability
// conditions checked at t = 0.
enum class ThetaLocation { InF, InA };

std::string to_string(ThetaLocation where);

enum class Coefficient { F, A, Sigma, B, FDot, ADot, FPrime, SigmaPrime };

// All coefficient values at one (theta, t).
struct CoeffValues {
  double f;
  double a;
  double sigma;
  double b;
  double f_dot;        // df/dtheta
  double a_dot;        // da/dtheta
  double f_prime;      // df/dt
  double sigma_prime;  // dsigma/dt
};

// Partially observed linear system
//   dX = f(theta,t) Y dt + eps sigma(t) dW,   X_0 = 0
//   dY = a(theta,t) Y dt + eps b(t) dV,       Y_0 = y0
// with theta in (alpha, beta).
class ModelSpec {
 public:
  // Throws InputError on malformed specs and AssumptionError when the
  // identifiability conditions at t = 0 fail on the theta mesh. Pass
  // check_identifiability = false for degenerate test models.
  ModelSpec(Expr f, Expr a, Expr sigma, Expr b, double alpha, double beta,
            double y0, double horizon, double eps, ThetaLocation where,
            bool check_identifiability = true);

  static ModelSpec from_json(const nlohmann::json& j);
  static ModelSpec load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  ModelSpec with_eps(double eps) const;

  const Expr& f() const { return f_; }
  const Expr& a() const { return a_; }
  const Expr& sigma() const { return sigma_; }
  const Expr& b() const { return b_; }
  const Expr& f_dot() const { return f_dot_; }
  const Expr& a_dot() const { return a_dot_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double y0() const { return y0_; }
  double horizon() const { return horizon_; }
  double eps() const { return eps_; }
  ThetaLocation theta_location() const { return where_; }

  bool contains(double theta) const { return theta >= alpha_ && theta <= beta_; }
  double project(double theta) const;

  // Checked evaluation: theta in [alpha, beta], t in [0, T].
  double eval_coeff(Coefficient which, double theta, double t) const;

  // Unchecked evaluation of every coefficient at (theta, t).
  CoeffValues coeffs(double theta, double t) const;

 private:
  void validate(bool check_identifiability) const;

  Expr f_, a_, sigma_, b_;
  Expr f_dot_, a_dot_, f_prime_, sigma_prime_;
  double alpha_, beta_, y0_, horizon_, eps_;
  ThetaLocation where_;
};

// Coefficients tabulated on the half-grid of a TimeGrid: entry 2k is node k,
// entry 2k+1 the midpoint of [t_k, t_{k+1}]. Backs the 4th-order steps.
struct CoeffTable {
  double theta = 0.0;
  std::vector<CoeffValues> half;

  const CoeffValues& at_node(std::size_t k) const { return half[2 * k]; }
  const CoeffValues& at_mid(std::size_t k) const { return half[2 * k + 1]; }
};

CoeffTable tabulate(const ModelSpec& model, double theta, const TimeGrid& grid);

// The eps = 0 system at a given theta, plus the Fisher information
// cumulative integral I_0^t(theta) = int_0^t (Mdot / sigma)^2 ds.
struct DeterministicLimit {
  TimeGrid grid;
  double theta = 0.0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> ydot;        // dm/dtheta along the noise-free path
  std::vector<double> Mdot;        // f_dot y + f ydot
  std::vector<double> fisher_cum;  // I_0^{t_k}
  std::vector<double> sigma;       // sigma(t_k), kept for score sums
};

// Trapezoid accumulation of (Mdot / sigma)^2 on a uniform grid of step h.
std::vector<double> cumulative_fisher(const std::vector<double>& Mdot,
                                      const std::vector<double>& sigma, double h);

DeterministicLimit limit_system(const ModelSpec& model, double theta,
                                const TimeGrid& grid);

// I_tau^t(theta), linear interpolation of the cumulative array between nodes.
double fisher_window(const DeterministicLimit& limit, double tau, double t);

// Linear interpolation of a node-valued series at time t.
double interpolate(const TimeGrid& grid, const std::vector<double>& values,
                   double t);

// x_tau(theta) and y_tau(theta) by 4th-order integration on [0, tau] with
// n_sub steps.
struct LimitPoint {
  double x;
  double y;
};
LimitPoint limit_point(const ModelSpec& model, double theta, double tau,
                       std::size_t n_sub);

}  // namespace kbos
