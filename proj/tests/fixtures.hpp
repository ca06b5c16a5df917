#pragma once

#include <cmath>

#include "kbos/model.hpp"
#include "oracles.hpp"

namespace fx {

using kbos::Expr;
using kbos::ModelSpec;
using kbos::ThetaLocation;

inline Expr c(double v) { return Expr::constant(v); }

// f = theta, a = 0, sigma = b = 1.
inline ModelSpec toy(double eps = 0.01) {
  return ModelSpec(Expr::theta(), c(0.0), c(1.0), c(1.0), 0.5, 1.5, 1.0, 1.0, eps,
                   ThetaLocation::InF);
}

// f = theta, a = 1.
inline ModelSpec ex1(double eps = 0.01) {
  return ModelSpec(Expr::theta(), c(1.0), c(1.0), c(1.0), 0.5, 1.5, 1.0, 1.0, eps,
                   ThetaLocation::InF);
}

// f = 1, a = theta.
inline ModelSpec ex2(double eps = 0.01) {
  return ModelSpec(c(1.0), Expr::theta(), c(1.0), c(1.0), 0.5, 1.5, 1.0, 1.0, eps,
                   ThetaLocation::InA);
}

// Time-varying coefficients everywhere:
//   f = theta (1 + t/2), a = 0.3 theta exp(-t), sigma = 1 + 0.2 t, b = 0.7 + 0.1 t
inline ModelSpec rich(double eps = 0.01) {
  const Expr t = Expr::time();
  const Expr th = Expr::theta();
  Expr f = th * (c(1.0) + c(0.5) * t);
  Expr a = c(0.3) * th * Expr::exp(c(-1.0) * t);
  Expr sigma = c(1.0) + c(0.2) * t;
  Expr b = c(0.7) + c(0.1) * t;
  return ModelSpec(f, a, sigma, b, 0.5, 1.5, 1.0, 1.0, eps, ThetaLocation::InF);
}

inline oracle::Coeffs rich_oracle() {
  oracle::Coeffs o;
  o.f = [](double th, double t) { return th * (1.0 + 0.5 * t); };
  o.a = [](double th, double t) { return 0.3 * th * std::exp(-t); };
  o.sigma = [](double, double t) { return 1.0 + 0.2 * t; };
  o.b = [](double, double t) { return 0.7 + 0.1 * t; };
  o.f_dot = [](double, double t) { return 1.0 + 0.5 * t; };
  o.a_dot = [](double, double t) { return 0.3 * std::exp(-t); };
  return o;
}

}  // namespace fx

#include "kbos/simulate.hpp"

namespace fx {

// Noise-free path taken from the 4th-order limit solution rather than Euler.
inline kbos::Trajectory exact_path(const kbos::ModelSpec& m, double theta,
                                   const kbos::TimeGrid& g) {
  const auto lim = kbos::limit_system(m, theta, g);
  kbos::Trajectory p{g, lim.x, lim.y};
  p.theta_true = theta;
  return p;
}

}  // namespace fx
