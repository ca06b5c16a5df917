#pragma once

#include <cstddef>
#include <vector>

#include "kbos/model.hpp"
#include "kbos/prelim.hpp"
#include "kbos/simulate.hpp"

namespace kbos {

// Score weight used in the one-step correction.
//   General:              Mdot = f_dot y + f ydot
//   ThetaFreeObservation: Mdot = f ydot (f must not depend on theta)
enum class ScoreForm { General, ThetaFreeObservation };

struct OneStepResult {
  double theta_star = 0.0;
  double theta_bar = 0.0;
  double correction = 0.0;   // sum Mdot sigma^-2 [dX - f m dt] over [tau, T]
  double fisher_used = 0.0;  // I_tau(theta_bar)
  bool prelim_clamped = false;
};

// theta-path of the one-step estimator-process on nodes t_k > tau where the
// windowed information clears the floor.
struct EstimatorProcess {
  TimeGrid grid;
  double theta_bar = 0.0;
  std::size_t tau_index = 0;
  bool prelim_clamped = false;
  std::vector<std::size_t> index;
  std::vector<double> t;
  std::vector<double> theta_star_t;
  std::vector<double> fisher_t;      // I_tau^t(theta_bar)
  std::vector<double> correction_t;  // running score sum

  // Estimate at grid node k, or nullptr when k is not on the process.
  const double* at_index(std::size_t k) const;
};

// Positivity floor for Fisher information: 1e-12 T / mean(sigma^2).
double fisher_floor(const ModelSpec& model, const TimeGrid& grid);

OneStepResult one_step_mle(const ModelSpec& model, const Trajectory& traj,
                           const PrelimResult& prelim,
                           ScoreForm form = ScoreForm::General);

EstimatorProcess one_step_process(const ModelSpec& model, const Trajectory& traj,
                                  const PrelimResult& prelim,
                                  ScoreForm form = ScoreForm::General);

// gamma_star of the adaptive filter at tau: continue the warm-up Riccati
// value, or restart from zero.
enum class AdaptiveInit { WarmStart, ZeroVariance };

struct AdaptiveFilterOutput {
  TimeGrid grid;
  std::size_t start_index = 0;  // tau node; earlier entries are the warm-up
  std::vector<double> m_star;
  std::vector<double> gamma_star_adaptive;
  std::vector<double> theta_used;
};

// Filter driven by the estimator-process: theta_{t_k} (last available value,
// projected onto [alpha, beta]) is held constant over [t_k, t_{k+1}].
AdaptiveFilterOutput adaptive_filter(const ModelSpec& model,
                                     const Trajectory& traj,
                                     const EstimatorProcess& process,
                                     AdaptiveInit init = AdaptiveInit::WarmStart);

// Pathwise representation of the filter mean through
//   N(theta, t) = exp int_0^t [a - D f] ds,   F = D / N,
// and the integrated-by-parts stochastic integral
//   G = F(t) X_t - F(lo) X_lo - int_lo^t F' X ds.
double robust_integral_G(const ModelSpec& model, double theta,
                         const Trajectory& traj, double lower, double t);

struct MStarResult {
  double t = 0.0;
  double theta = 0.0;  // parameter value plugged in
  double m_star = 0.0;
  double N_val = 0.0;
  double G_val = 0.0;
};

// y0 N(theta, t) + N(theta, t) G(theta, X, t) with G over [0, t].
MStarResult conditional_mean_robust(const ModelSpec& model, double theta,
                                    const Trajectory& traj, double t);

// The same representation evaluated at the estimator-process value at t.
MStarResult m_star(const ModelSpec& model, const Trajectory& traj,
                   const EstimatorProcess& process, double t);

}  // namespace kbos
