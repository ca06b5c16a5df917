#include "kbos/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "kbos/error.hpp"
#include "kbos/fisher.hpp"
#include "kbos/kbfilter.hpp"
#include "kbos/simulate.hpp"

namespace kbos {

EstimatorSet parse_estimators(const std::string& list) {
  EstimatorSet s;
  s.prelim = false;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "prelim") s.prelim = true;
    else if (item == "onestep") s.onestep = true;
    else if (item == "process") s.process = true;
    else if (item == "mstar") s.mstar = true;
    else if (item == "adaptive") s.adaptive = true;
    else if (item == "filter") s.filter = true;
    else if (item == "all") s = {true, true, true, true, true, true};
    else throw InputError("unknown estimator '" + item + "'");
  }
  // theta_bar is always computed; prelim only controls reporting.
  s.prelim = true;
  return s;
}

std::string to_string(const EstimatorSet& set) {
  std::string out = "prelim";
  if (set.onestep) out += ",onestep";
  if (set.process) out += ",process";
  if (set.mstar) out += ",mstar";
  if (set.adaptive) out += ",adaptive";
  if (set.filter) out += ",filter";
  return out;
}

double McConfig::learning_tau() const {
  if (tau) {
    if (!(*tau > 0.0 && *tau < grid.horizon())) {
      throw InputError("learning interval override must lie in (0, T)");
    }
    return *tau;
  }
  const bool downstream_onestep = estimators.onestep || estimators.needs_process();
  return learning_interval(model.eps(), delta, model.horizon(),
                           model.theta_location(),
                           downstream_onestep ? Downstream::OneStep
                                              : Downstream::Preliminary);
}

void McConfig::validate() const {
  if (n_rep < 2) throw InputError("n_rep must be at least 2");
  if (!(theta0 > model.alpha() && theta0 < model.beta())) {
    throw InputError("theta0 must lie inside (alpha, beta)");
  }
  if (grid.horizon() != model.horizon()) {
    throw InputError("grid horizon differs from the model horizon T");
  }
  const double tau = grid.node(learning_index(grid, learning_tau()));
  for (double t : checkpoints) {
    if (!(t > tau && t <= grid.horizon())) {
      throw InputError("checkpoint " + std::to_string(t) +
                       " outside (tau_eps, T]");
    }
  }
}

std::size_t McReport::n_failed() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const McRow& r) { return !r.ok; }));
}

double McReport::failure_fraction() const {
  return rows.empty() ? 0.0
                      : static_cast<double>(n_failed()) / static_cast<double>(rows.size());
}

unsigned worker_count(unsigned requested) {
  unsigned n = requested ? requested : std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("KB_ONESTEP_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

namespace {

// Per-run state shared read-only by all workers.
struct Shared {
  const McConfig& cfg;
  PathSimulator sim;
  double tau;  // grid-snapped
  std::size_t tau_index;
  std::vector<std::size_t> checkpoint_index;
  ScoreForm form;
  std::optional<KalmanBucyFilter> oracle;
};

McRow replicate(const Shared& sh, std::uint64_t seed) {
  const auto& cfg = sh.cfg;
  const auto& est = cfg.estimators;
  McRow row;
  row.seed = seed;
  try {
    const auto traj = est.needs_full_path() ? sh.sim(seed) : sh.sim(seed, sh.tau_index);
    const auto prelim = estimate_prelim(cfg.prelim_method, cfg.model, traj, sh.tau);
    row.theta_bar = prelim.theta_bar;
    row.clamped = prelim.clamped();

    std::optional<EstimatorProcess> process;
    if (est.needs_process()) {
      process = one_step_process(cfg.model, traj, prelim, sh.form);
      row.theta_star = process->theta_star_t.back();
      for (auto k : sh.checkpoint_index) {
        const double* v = process->at_index(k);
        row.process.push_back(v ? *v - cfg.theta0
                                : std::numeric_limits<double>::quiet_NaN());
      }
    } else if (est.onestep) {
      row.theta_star = one_step_mle(cfg.model, traj, prelim, sh.form).theta_star;
    }
    if (est.mstar) {
      for (std::size_t i = 0; i < sh.checkpoint_index.size(); ++i) {
        const double t = cfg.grid.node(sh.checkpoint_index[i]);
        const double est_m = m_star(cfg.model, traj, *process, t).m_star;
        const double ref = conditional_mean_robust(cfg.model, cfg.theta0, traj, t).m_star;
        row.mstar_err.push_back(est_m - ref);
      }
    }
    if (est.adaptive) {
      const auto ad = adaptive_filter(cfg.model, traj, *process, cfg.adaptive_init);
      for (auto k : sh.checkpoint_index) row.adaptive_err.push_back(ad.m_star[k] - traj.Y[k]);
    }
    if (est.filter) {
      const auto fo = sh.oracle->run(traj);
      for (auto k : sh.checkpoint_index) row.filter_err.push_back(fo.m[k] - traj.Y[k]);
    }
  } catch (const NumericalError& e) {
    row.ok = false;
    row.error = e.what();
  } catch (const AssumptionError& e) {
    row.ok = false;
    row.error = e.what();
  }
  return row;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_t(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

nlohmann::json or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

// Column of a per-checkpoint vector over successful rows.
std::vector<double> column(const std::vector<McRow>& rows,
                           std::vector<double> McRow::*field, std::size_t i,
                           double scale) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const double v = (r.*field)[i];
    if (std::isfinite(v)) out.push_back(v / scale);
  }
  return out;
}

}  // namespace

nlohmann::json aggregate(const McConfig& cfg, const std::vector<McRow>& rows,
                         double tau_eps) {
  const auto& est = cfg.estimators;
  const double eps = cfg.model.eps();
  // Errors are reported on the eps^-1 scale; eps = 0 runs stay unscaled.
  const double scale = eps > 0.0 ? eps : 1.0;

  std::vector<const McRow*> ok;
  for (const auto& r : rows) if (r.ok) ok.push_back(&r);

  nlohmann::json j;
  j["schema"] = 1;
  j["n_rep"] = rows.size();
  j["n_ok"] = ok.size();
  j["n_failed"] = rows.size() - ok.size();
  j["failure_fraction"] =
      rows.empty() ? 0.0 : static_cast<double>(rows.size() - ok.size()) / rows.size();
  j["eps"] = eps;
  j["delta"] = cfg.delta;
  j["theta0"] = cfg.theta0;
  j["tau_eps"] = tau_eps;
  j["scale"] = scale;

  const FisherInformation info(cfg.model, cfg.theta0, cfg.grid);

  {
    std::vector<double> e;
    std::size_t clamps = 0;
    for (auto* r : ok) {
      e.push_back(r->theta_bar - cfg.theta0);
      clamps += r->clamped ? 1 : 0;
    }
    const auto s = summarize(e);
    j["prelim"] = {{"bias", s.mean},
                   {"variance", s.variance},
                   {"mse", s.mean_sq},
                   {"mse_stderr", s.mean_sq_stderr},
                   {"clamp_fraction",
                    ok.empty() ? 0.0 : static_cast<double>(clamps) / ok.size()}};
  }

  if (est.onestep || est.needs_process()) {
    std::vector<double> e;
    for (auto* r : ok) e.push_back((r->theta_star - cfg.theta0) / scale);
    const auto s = summarize(e);
    const double target = 1.0 / info.total();
    nlohmann::json o = {{"scaled_mean", s.mean},
                        {"scaled_variance", s.variance},
                        {"scaled_mse", s.mean_sq},
                        {"target_variance", target},
                        {"variance_ratio", s.variance / target},
                        {"normality", nullptr}};
    if (e.size() >= 100 && s.variance > 0.0) {
      const auto nr = normality_check(e, target);
      o["normality"] = {{"statistic", nr.statistic},
                        {"p_value", nr.p_value},
                        {"reject_01", nr.reject_01}};
    }
    j["onestep"] = o;
  }

  auto per_checkpoint = [&](std::vector<double> McRow::*field, double sc,
                            auto&& target_at) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
      const double t = cfg.checkpoints[i];
      const auto s = summarize(column(rows, field, i, sc));
      const double target = target_at(t);
      arr.push_back({{"t", t},
                     {"n", s.n},
                     {"mean", s.mean},
                     {"variance", s.variance},
                     {"mse", s.mean_sq},
                     {"mse_stderr", s.mean_sq_stderr},
                     {"target", or_null(target)},
                     {"variance_ratio", or_null(s.variance / target)},
                     {"mse_ratio", or_null(s.mean_sq / target)}});
    }
    return arr;
  };

  if (est.process) {
    j["process"] = per_checkpoint(&McRow::process, scale, [&](double t) {
      return 1.0 / info.window(0.0, t);
    });
  }
  if (est.mstar) {
    j["mstar"] = per_checkpoint(&McRow::mstar_err, scale, [&](double t) {
      try {
        return mse_lower_bound(cfg.model, cfg.theta0, t, cfg.grid).bound;
      } catch (const SingularInformationError&) {
        return std::numeric_limits<double>::quiet_NaN();
      }
    });
  }
  if (est.adaptive || est.filter) {
    const auto ric = solve_riccati(cfg.model, cfg.theta0, cfg.grid);
    auto benchmark = [&](double t) {
      return eps * eps * interpolate(cfg.grid, ric.gamma_star, t);
    };
    if (est.adaptive) j["adaptive"] = per_checkpoint(&McRow::adaptive_err, 1.0, benchmark);
    if (est.filter) j["filter"] = per_checkpoint(&McRow::filter_err, 1.0, benchmark);
  }
  return j;
}

McReport run_replications(const McConfig& cfg) {
  cfg.validate();
  const double tau_req = cfg.learning_tau();
  const std::size_t kt = learning_index(cfg.grid, tau_req);

  Shared sh{cfg, PathSimulator(cfg.model, cfg.theta0, cfg.grid), cfg.grid.node(kt), kt, {},
            cfg.model.theta_location() == ThetaLocation::InA &&
                    !cfg.model.f().depends_on_theta()
                ? ScoreForm::ThetaFreeObservation
                : ScoreForm::General,
            std::nullopt};
  for (double t : cfg.checkpoints) sh.checkpoint_index.push_back(cfg.grid.nearest_index(t));
  if (cfg.estimators.filter) sh.oracle.emplace(cfg.model, cfg.theta0, cfg.grid);

  McReport rep{cfg, cfg.grid.node(kt), kt, std::vector<McRow>(cfg.n_rep), {}};
  const unsigned nw = std::min<unsigned>(worker_count(cfg.threads),
                                         static_cast<unsigned>(cfg.n_rep));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.n_rep) return;
      try {
        rep.rows[i] = replicate(sh, cfg.base_seed + i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = cfg.n_rep;
      }
    }
  };
  if (nw <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < nw; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  rep.aggregates = aggregate(cfg, rep.rows, rep.tau_eps);
  return rep;
}

void McReport::write_rows_csv(std::ostream& os) const {
  const auto& est = config.estimators;
  os << "seed,ok,theta_bar,clamped";
  if (est.onestep || est.needs_process()) os << ",theta_star";
  auto header = [&](bool on, const char* name) {
    if (!on) return;
    for (double t : config.checkpoints) os << ',' << name << '_' << fmt_t(t);
  };
  header(est.process, "process");
  header(est.mstar, "mstar_err");
  header(est.adaptive, "adaptive_err");
  header(est.filter, "filter_err");
  os << ",error\n";

  for (const auto& r : rows) {
    os << r.seed << ',' << (r.ok ? 1 : 0) << ',' << fmt(r.theta_bar) << ','
       << (r.clamped ? 1 : 0);
    if (est.onestep || est.needs_process()) os << ',' << fmt(r.theta_star);
    auto cells = [&](bool on, const std::vector<double>& v) {
      if (!on) return;
      for (std::size_t i = 0; i < config.checkpoints.size(); ++i) {
        os << ',' << (i < v.size() ? fmt(v[i]) : std::string("nan"));
      }
    };
    cells(est.process, r.process);
    cells(est.mstar, r.mstar_err);
    cells(est.adaptive, r.adaptive_err);
    cells(est.filter, r.filter_err);
    std::string msg = r.error;
    std::replace(msg.begin(), msg.end(), '"', '\'');
    os << ",\"" << msg << "\"\n";
  }
}

}  // namespace kbos
