#include "kbos/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kbos/error.hpp"
#include "kbos/kbfilter.hpp"

namespace kbos {

namespace {

constexpr std::size_t kThetaMesh = 200;
constexpr std::size_t kTimeMesh = 200;
constexpr double kSeparation = 1e-12;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

TimeGrid::TimeGrid(std::size_t n_steps, double horizon)
    : n_steps_(n_steps), horizon_(horizon), h_(0.0) {
  if (n_steps == 0) throw InputError("time grid needs at least one step");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InputError("time grid horizon must be positive and finite");
  }
  h_ = horizon / static_cast<double>(n_steps);
}

double TimeGrid::node(std::size_t k) const {
  if (k >= n_steps_) return k == n_steps_ ? horizon_ : static_cast<double>(k) * h_;
  return static_cast<double>(k) * h_;
}

std::size_t TimeGrid::nearest_index(double t) const {
  if (!(t >= -1e-12 * horizon_ && t <= horizon_ * (1.0 + 1e-12))) {
    throw InputError("time " + fmt_double(t) + " outside grid [0, " +
                     fmt_double(horizon_) + "]");
  }
  const double pos = std::round(t / h_);
  return std::min(n_steps_, static_cast<std::size_t>(std::max(0.0, pos)));
}

TimeGrid TimeGrid::prefix(std::size_t k) const {
  if (k == 0 || k > n_steps_) throw InputError("grid prefix out of range");
  return TimeGrid(k, node(k), h_);
}

std::string to_string(ThetaLocation where) {
  return where == ThetaLocation::InF ? "theta_in_f" : "theta_in_a";
}

ModelSpec::ModelSpec(Expr f, Expr a, Expr sigma, Expr b, double alpha,
                     double beta, double y0, double horizon, double eps,
                     ThetaLocation where, bool check_identifiability)
    : f_(std::move(f)),
      a_(std::move(a)),
      sigma_(std::move(sigma)),
      b_(std::move(b)),
      alpha_(alpha),
      beta_(beta),
      y0_(y0),
      horizon_(horizon),
      eps_(eps),
      where_(where) {
  f_dot_ = f_.d_theta();
  a_dot_ = a_.d_theta();
  f_prime_ = f_.d_t();
  sigma_prime_ = sigma_.d_t();
  validate(check_identifiability);
}

void ModelSpec::validate(bool check_identifiability) const {
  if (!std::isfinite(alpha_) || !std::isfinite(beta_) || !(alpha_ < beta_)) {
    throw InputError("parameter interval needs finite alpha < beta");
  }
  if (!std::isfinite(y0_) || y0_ == 0.0) {
    throw InputError("initial state y0 must be finite and nonzero");
  }
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
    throw InputError("horizon T must be positive and finite");
  }
  if (!(eps_ >= 0.0) || !std::isfinite(eps_)) {
    throw InputError("noise level eps must be finite and nonnegative");
  }
  if (sigma_.depends_on_theta()) throw InputError("sigma must not depend on theta");
  if (b_.depends_on_theta()) throw InputError("b must not depend on theta");

  double sigma_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= kThetaMesh; ++i) {
    const double th = alpha_ + (beta_ - alpha_) * static_cast<double>(i) / kThetaMesh;
    for (std::size_t j = 0; j <= kTimeMesh; ++j) {
      const double t = horizon_ * static_cast<double>(j) / kTimeMesh;
      const auto c = coeffs(th, t);
      for (double v : {c.f, c.a, c.sigma, c.b, c.f_dot, c.a_dot, c.f_prime,
                       c.sigma_prime}) {
        if (!std::isfinite(v)) {
          throw InputError("coefficient not finite at theta=" + fmt_double(th) +
                           ", t=" + fmt_double(t));
        }
      }
      sigma_min = std::min(sigma_min, std::abs(c.sigma));
    }
  }
  if (!(sigma_min > 1e-8)) {
    throw InputError("sigma(t) must be bounded away from zero on [0, T]");
  }

  if (!check_identifiability) return;
  double inf_level = std::numeric_limits<double>::infinity();
  double inf_slope = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kThetaMesh; ++i) {
    const double th =
        alpha_ + (beta_ - alpha_) * static_cast<double>(i) / (kThetaMesh - 1);
    const auto c = coeffs(th, 0.0);
    if (where_ == ThetaLocation::InF) {
      inf_level = std::min(inf_level, std::abs(c.f));
      inf_slope = std::min(inf_slope, std::abs(c.f_dot));
    } else {
      inf_level = std::min(inf_level, c.a);
      inf_slope = std::min(inf_slope, c.a_dot);
    }
  }
  if (where_ == ThetaLocation::InF) {
    if (!(inf_level > kSeparation) || !(inf_slope > kSeparation)) {
      throw AssumptionError(
          "theta_in_f model needs |f(theta,0)| and |df/dtheta(theta,0)| "
          "separated from zero over the parameter interval");
    }
  } else {
    if (!(inf_level > kSeparation) || !(inf_slope > kSeparation)) {
      throw AssumptionError(
          "theta_in_a model needs a(theta,0) > 0 and da/dtheta(theta,0) > 0 "
          "over the parameter interval");
    }
  }
}

double ModelSpec::project(double theta) const {
  return std::clamp(theta, alpha_, beta_);
}

double ModelSpec::eval_coeff(Coefficient which, double theta, double t) const {
  if (!(theta >= alpha_ && theta <= beta_)) {
    throw InputError("theta=" + fmt_double(theta) + " outside [" +
                     fmt_double(alpha_) + ", " + fmt_double(beta_) + "]");
  }
  if (!(t >= 0.0 && t <= horizon_)) {
    throw InputError("t=" + fmt_double(t) + " outside [0, " +
                     fmt_double(horizon_) + "]");
  }
  switch (which) {
    case Coefficient::F: return f_(theta, t);
    case Coefficient::A: return a_(theta, t);
    case Coefficient::Sigma: return sigma_(theta, t);
    case Coefficient::B: return b_(theta, t);
    case Coefficient::FDot: return f_dot_(theta, t);
    case Coefficient::ADot: return a_dot_(theta, t);
    case Coefficient::FPrime: return f_prime_(theta, t);
    case Coefficient::SigmaPrime: return sigma_prime_(theta, t);
  }
  return 0.0;
}

CoeffValues ModelSpec::coeffs(double theta, double t) const {
  return {f_(theta, t),     a_(theta, t),     sigma_(theta, t),
          b_(theta, t),     f_dot_(theta, t), a_dot_(theta, t),
          f_prime_(theta, t), sigma_prime_(theta, t)};
}

ModelSpec ModelSpec::with_eps(double eps) const {
  ModelSpec copy = *this;
  copy.eps_ = eps;
  copy.validate(false);
  return copy;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  try {
    for (const char* key : {"f", "a", "sigma", "b", "alpha", "beta", "y0", "T",
                            "eps", "case"}) {
      if (!j.contains(key)) {
        throw InputError(std::string("model is missing field '") + key + "'");
      }
    }
    const auto tag = j.at("case").get<std::string>();
    ThetaLocation where;
    if (tag == "theta_in_f" || tag == "ThetaInF") {
      where = ThetaLocation::InF;
    } else if (tag == "theta_in_a" || tag == "ThetaInA") {
      where = ThetaLocation::InA;
    } else {
      throw InputError("model case must be theta_in_f or theta_in_a, got '" +
                       tag + "'");
    }
    return ModelSpec(Expr::from_json(j.at("f")), Expr::from_json(j.at("a")),
                     Expr::from_json(j.at("sigma")), Expr::from_json(j.at("b")),
                     j.at("alpha").get<double>(), j.at("beta").get<double>(),
                     j.at("y0").get<double>(), j.at("T").get<double>(),
                     j.at("eps").get<double>(), where);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model: ") + e.what());
  }
}

ModelSpec ModelSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("model file " + path.string() + " is not valid JSON: " +
                     e.what());
  }
  return from_json(j);
}

nlohmann::json ModelSpec::to_json() const {
  return {{"f", f_.to_json()},         {"a", a_.to_json()},
          {"sigma", sigma_.to_json()}, {"b", b_.to_json()},
          {"alpha", alpha_},           {"beta", beta_},
          {"y0", y0_},                 {"T", horizon_},
          {"eps", eps_},               {"case", to_string(where_)}};
}

CoeffTable tabulate(const ModelSpec& model, double theta, const TimeGrid& grid) {
  CoeffTable table;
  table.theta = theta;
  table.half.resize(2 * grid.n_steps() + 1);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    table.half[2 * k] = model.coeffs(theta, grid.node(k));
    table.half[2 * k + 1] = model.coeffs(theta, grid.midpoint(k));
  }
  table.half.back() = model.coeffs(theta, grid.node(grid.n_steps()));
  return table;
}

namespace {

// State of the noise-free system: x, y, gamma_star, ydot.
struct LimitState {
  double x, y, g, yd;
};

LimitState limit_rhs(const LimitState& s, const CoeffValues& c) {
  const double inv_s2 = 1.0 / (c.sigma * c.sigma);
  const double D = s.g * c.f * inv_s2;
  return {c.f * s.y, c.a * s.y, riccati_rhs(s.g, c),
          (c.a - D * c.f) * s.yd + (c.a_dot - D * c.f_dot) * s.y};
}

LimitState axpy(const LimitState& s, double h, const LimitState& k) {
  return {s.x + h * k.x, s.y + h * k.y, s.g + h * k.g, s.yd + h * k.yd};
}

}  // namespace

DeterministicLimit limit_system(const ModelSpec& model, double theta,
                                const TimeGrid& grid) {
  const auto table = tabulate(model, theta, grid);
  const std::size_t n = grid.n_steps();
  const double h = grid.step();

  DeterministicLimit out{grid, theta, {}, {}, {}, {}, {}, {}};
  out.x.resize(n + 1);
  out.y.resize(n + 1);
  out.ydot.resize(n + 1);
  out.Mdot.resize(n + 1);
  out.fisher_cum.resize(n + 1);
  out.sigma.resize(n + 1);

  LimitState s{0.0, model.y0(), 0.0, 0.0};
  auto record = [&](std::size_t k) {
    for (double v : {s.x, s.y, s.g, s.yd}) {
      if (!std::isfinite(v)) {
        throw NumericalError("limit system overflow at node " +
                             std::to_string(k) + " (t=" +
                             fmt_double(grid.node(k)) + ")");
      }
    }
    const auto& c = table.at_node(k);
    out.x[k] = s.x;
    out.y[k] = s.y;
    out.ydot[k] = s.yd;
    out.Mdot[k] = c.f_dot * s.y + c.f * s.yd;
    out.sigma[k] = c.sigma;
  };

  record(0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto k1 = limit_rhs(s, table.at_node(k));
    const auto k2 = limit_rhs(axpy(s, 0.5 * h, k1), table.at_mid(k));
    const auto k3 = limit_rhs(axpy(s, 0.5 * h, k2), table.at_mid(k));
    const auto k4 = limit_rhs(axpy(s, h, k3), table.at_node(k + 1));
    s.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    s.y += h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
    s.g += h / 6.0 * (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g);
    s.yd += h / 6.0 * (k1.yd + 2.0 * k2.yd + 2.0 * k3.yd + k4.yd);
    record(k + 1);
  }

  out.fisher_cum = cumulative_fisher(out.Mdot, out.sigma, h);
  return out;
}

std::vector<double> cumulative_fisher(const std::vector<double>& Mdot,
                                      const std::vector<double>& sigma, double h) {
  std::vector<double> cum(Mdot.size(), 0.0);
  for (std::size_t k = 0; k + 1 < Mdot.size(); ++k) {
    const double lo = Mdot[k] / sigma[k];
    const double hi = Mdot[k + 1] / sigma[k + 1];
    cum[k + 1] = cum[k] + 0.5 * h * (lo * lo + hi * hi);
  }
  return cum;
}

double interpolate(const TimeGrid& grid, const std::vector<double>& values,
                   double t) {
  if (values.size() != grid.size()) {
    throw InputError("series length does not match grid");
  }
  if (!(t >= 0.0 && t <= grid.horizon() * (1.0 + 1e-12))) {
    throw InputError("time " + fmt_double(t) + " outside grid");
  }
  const double pos = t / grid.step();
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-9) {
    return values[std::min(grid.n_steps(), static_cast<std::size_t>(nearest))];
  }
  const auto k = std::min(grid.n_steps() - 1, static_cast<std::size_t>(pos));
  const double w = pos - static_cast<double>(k);
  return values[k] + w * (values[k + 1] - values[k]);
}

double fisher_window(const DeterministicLimit& limit, double tau, double t) {
  if (!(tau < t)) {
    throw InputError("fisher window needs tau < t (tau=" + fmt_double(tau) +
                     ", t=" + fmt_double(t) + ")");
  }
  if (tau < 0.0 || t > limit.grid.horizon() * (1.0 + 1e-12)) {
    throw InputError("fisher window outside [0, T]");
  }
  return interpolate(limit.grid, limit.fisher_cum, t) -
         interpolate(limit.grid, limit.fisher_cum, tau);
}

LimitPoint limit_point(const ModelSpec& model, double theta, double tau,
                       std::size_t n_sub) {
  if (!(tau >= 0.0)) throw InputError("limit_point needs tau >= 0");
  if (tau == 0.0) return {0.0, model.y0()};
  n_sub = std::max<std::size_t>(n_sub, 1);
  const double h = tau / static_cast<double>(n_sub);
  double x = 0.0;
  double y = model.y0();
  const Expr& f = model.f();
  const Expr& a = model.a();
  for (std::size_t k = 0; k < n_sub; ++k) {
    const double t0 = static_cast<double>(k) * h;
    const double tm = t0 + 0.5 * h;
    const double t1 = t0 + h;
    const double f0 = f(theta, t0), fm = f(theta, tm), f1 = f(theta, t1);
    const double a0 = a(theta, t0), am = a(theta, tm), a1 = a(theta, t1);
    const double kx1 = f0 * y, ky1 = a0 * y;
    const double y2 = y + 0.5 * h * ky1;
    const double kx2 = fm * y2, ky2 = am * y2;
    const double y3 = y + 0.5 * h * ky2;
    const double kx3 = fm * y3, ky3 = am * y3;
    const double y4 = y + h * ky3;
    const double kx4 = f1 * y4, ky4 = a1 * y4;
    x += h / 6.0 * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4);
    y += h / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4);
  }
  if (!std::isfinite(x) || !std::isfinite(y)) {
    throw NumericalError("limit trajectory overflow on [0, tau]");
  }
  return {x, y};
}

}  // namespace kbos
