#include "kbos/kbfilter.hpp"

#include <cmath>
#include <string>

#include "kbos/error.hpp"

namespace kbos {

namespace {

constexpr double kNegativeTolerance = -1e-12;

void check_gamma(double g, std::size_t k) {
  if (!std::isfinite(g) || g < kNegativeTolerance) {
    throw NumericalError("Riccati solution invalid at node " + std::to_string(k) +
                         " (gamma_star=" + std::to_string(g) + ")");
  }
}

}  // namespace

RiccatiSolution solve_riccati(const CoeffTable& table, const TimeGrid& grid,
                              bool with_derivative) {
  const std::size_t n = grid.n_steps();
  if (table.half.size() != 2 * n + 1) {
    throw InputError("coefficient table does not match grid");
  }
  const double h = grid.step();
  RiccatiSolution out;
  out.gamma_star.resize(n + 1);
  out.D.resize(n + 1);
  if (with_derivative) {
    out.gamma_star_dot.resize(n + 1);
    out.D_dot.resize(n + 1);
  }

  double g = 0.0;
  double gd = 0.0;
  auto record = [&](std::size_t k) {
    check_gamma(g, k);
    const auto& c = table.at_node(k);
    const double inv_s2 = 1.0 / (c.sigma * c.sigma);
    out.gamma_star[k] = g;
    out.D[k] = g * c.f * inv_s2;
    if (with_derivative) {
      if (!std::isfinite(gd)) {
        throw NumericalError("Riccati derivative not finite at node " +
                             std::to_string(k));
      }
      out.gamma_star_dot[k] = gd;
      out.D_dot[k] = (gd * c.f + g * c.f_dot) * inv_s2;
    }
  };

  record(0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c0 = table.at_node(k);
    const auto& cm = table.at_mid(k);
    const auto& c1 = table.at_node(k + 1);
    const double k1 = riccati_rhs(g, c0);
    const double g2 = g + 0.5 * h * k1;
    const double k2 = riccati_rhs(g2, cm);
    const double g3 = g + 0.5 * h * k2;
    const double k3 = riccati_rhs(g3, cm);
    const double g4 = g + h * k3;
    const double k4 = riccati_rhs(g4, c1);
    if (with_derivative) {
      const double d1 = riccati_rhs_dtheta(g, gd, c0);
      const double d2 = riccati_rhs_dtheta(g2, gd + 0.5 * h * d1, cm);
      const double d3 = riccati_rhs_dtheta(g3, gd + 0.5 * h * d2, cm);
      const double d4 = riccati_rhs_dtheta(g4, gd + h * d3, c1);
      gd += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    }
    g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    record(k + 1);
  }
  return out;
}

RiccatiSolution solve_riccati(const ModelSpec& model, double theta,
                              const TimeGrid& grid, bool with_derivative) {
  return solve_riccati(tabulate(model, theta, grid), grid, with_derivative);
}

KalmanBucyFilter::KalmanBucyFilter(const ModelSpec& model, double theta,
                                   const TimeGrid& grid, bool with_derivative)
    : grid_(grid), theta_(theta), y0_(model.y0()), with_derivative_(with_derivative) {
  const auto table = tabulate(model, theta, grid);
  riccati_ = solve_riccati(table, grid, with_derivative);
  nodes_.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) nodes_.push_back(table.at_node(k));
}

FilterOutput KalmanBucyFilter::run(const Trajectory& traj) const {
  const std::size_t n = traj.grid.n_steps();
  if (traj.grid.step() != grid_.step() || n > grid_.n_steps() ||
      traj.X.size() != n + 1) {
    throw InputError("trajectory grid does not match the filter grid");
  }
  const double h = grid_.step();
  FilterOutput out{traj.grid, theta_, std::vector<double>(n + 1), {}, {}, {}};
  out.gamma_star.assign(riccati_.gamma_star.begin(),
                        riccati_.gamma_star.begin() + static_cast<long>(n + 1));
  out.D.assign(riccati_.D.begin(), riccati_.D.begin() + static_cast<long>(n + 1));

  double m = y0_;
  out.m[0] = m;
  if (!with_derivative_) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto& c = nodes_[k];
      const double D = riccati_.D[k];
      const double dX = traj.X[k + 1] - traj.X[k];
      m += (c.a - D * c.f) * m * h + D * dX;
      out.m[k + 1] = m;
    }
  } else {
    std::vector<double> mdot(n + 1);
    double md = 0.0;
    mdot[0] = md;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& c = nodes_[k];
      const double D = riccati_.D[k];
      const double Dd = riccati_.D_dot[k];
      const double dX = traj.X[k + 1] - traj.X[k];
      md += (c.a - D * c.f) * md * h + Dd * dX +
            (c.a_dot - Dd * c.f - D * c.f_dot) * m * h;
      m += (c.a - D * c.f) * m * h + D * dX;
      out.m[k + 1] = m;
      mdot[k + 1] = md;
    }
    out.mdot = std::move(mdot);
  }
  if (!std::isfinite(m)) throw NumericalError("filter state diverged");
  return out;
}

FilterOutput run_filter(const ModelSpec& model, double theta,
                        const Trajectory& traj, bool with_derivative) {
  return KalmanBucyFilter(model, theta, traj.grid, with_derivative).run(traj);
}

}  // namespace kbos
