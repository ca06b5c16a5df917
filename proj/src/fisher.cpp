#include "kbos/fisher.hpp"

#include <string>

#include "kbos/error.hpp"
#include "kbos/onestep.hpp"

namespace kbos {

FisherInformation::FisherInformation(const ModelSpec& model, double theta,
                                     const TimeGrid& grid)
    : limit_(limit_system(model, theta, grid)), floor_(fisher_floor(model, grid)) {}

double FisherInformation::from(double tau) const {
  return window(tau, limit_.grid.horizon());
}

double FisherInformation::window(double tau, double t) const {
  return fisher_window(limit_, tau, t);
}

EfficiencyBound mse_lower_bound(const ModelSpec& model, double theta0, double t,
                                const TimeGrid& grid) {
  const FisherInformation info(model, theta0, grid);
  EfficiencyBound out;
  out.t = t;
  out.theta0 = theta0;
  out.fisher = t > 0.0 ? info.window(0.0, t) : 0.0;
  out.ydot = interpolate(grid, info.limit().ydot, t);
  if (!(out.fisher >= info.floor())) {
    throw SingularInformationError("I^t(theta0) = " + std::to_string(out.fisher) +
                                   " is below the floor at t = " + std::to_string(t));
  }
  out.bound = out.ydot * out.ydot / out.fisher;
  return out;
}

}  // namespace kbos
