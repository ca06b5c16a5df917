#pragma once

#include "kbos/model.hpp"

namespace kbos {

// Fisher information queries at one theta, all backed by a single
// cumulative array so windows are exact differences.
class FisherInformation {
 public:
  FisherInformation(const ModelSpec& model, double theta, const TimeGrid& grid);

  // I(theta) = I_0^T.
  double total() const { return limit_.fisher_cum.back(); }
  // I_tau(theta) = I_tau^T.
  double from(double tau) const;
  // I_tau^t(theta).
  double window(double tau, double t) const;

  const DeterministicLimit& limit() const { return limit_; }
  double floor() const { return floor_; }

 private:
  DeterministicLimit limit_;
  double floor_;
};

// Lower bound on eps^-2 E|m_hat(t) - m(theta0, t)|^2 for any estimator:
// ydot(theta0, t)^2 / I^t(theta0).
struct EfficiencyBound {
  double t = 0.0;
  double bound = 0.0;
  double theta0 = 0.0;
  double ydot = 0.0;
  double fisher = 0.0;  // I_0^t(theta0)
};

EfficiencyBound mse_lower_bound(const ModelSpec& model, double theta0, double t,
                                const TimeGrid& grid);

}  // namespace kbos
