// Command-line front end: simulate | filter | estimate | montecarlo | bound.
//
// Exit codes: 0 ok, 2 config/input error, 3 numerical failure,
// 4 statistical failure (assertion failed or > 5% replication failures).

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbos/error.hpp"
#include "kbos/fisher.hpp"
#include "kbos/io.hpp"
#include "kbos/kbfilter.hpp"
#include "kbos/mc.hpp"
#include "kbos/onestep.hpp"
#include "kbos/prelim.hpp"
#include "kbos/simulate.hpp"
#include "kbos/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kbos;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitStatistical = 4;

struct Common {
  std::string model_path;
  std::optional<double> eps;
  std::size_t steps = 10000;
  std::uint64_t seed = 1;
  std::string out = "out";
};

// Path source for filter/estimate: a trajectory directory, or inline
// simulation at --theta-true.
struct PathSource {
  std::string traj_dir;
  std::optional<double> theta_true;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed = true) {
  cmd->add_option("--model", c.model_path, "model JSON file")->required();
  cmd->add_option("--eps", c.eps, "noise level (overrides the model file)");
  cmd->add_option("--steps", c.steps, "grid intervals on [0, T]")->check(CLI::PositiveNumber);
  if (with_seed) cmd->add_option("--seed", c.seed, "RNG seed");
  cmd->add_option("-o,--out", c.out, "output directory");
}

void add_source(CLI::App* cmd, PathSource& s) {
  cmd->add_option("--traj", s.traj_dir, "trajectory directory from `simulate`");
  cmd->add_option("--theta-true", s.theta_true, "simulate inline at this parameter");
}

ModelSpec load_model(const Common& c) {
  if (!fs::exists(c.model_path)) throw InputError("model file not found: " + c.model_path);
  auto model = ModelSpec::load(c.model_path);
  return c.eps ? model.with_eps(*c.eps) : model;
}

Trajectory obtain_path(const ModelSpec& model, const Common& c, const PathSource& s) {
  if (!s.traj_dir.empty() && s.theta_true) {
    throw InputError("give either --traj or --theta-true, not both");
  }
  if (!s.traj_dir.empty()) {
    auto traj = read_trajectory(s.traj_dir);
    if (std::abs(traj.grid.horizon() - model.horizon()) > 1e-12 * model.horizon()) {
      throw InputError("trajectory horizon differs from the model horizon");
    }
    return traj;
  }
  if (!s.theta_true) throw InputError("need --traj or --theta-true");
  return simulate_path(model, *s.theta_true, TimeGrid(c.steps, model.horizon()), c.seed);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') throw InputError("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// "a:b:c" -> a, a + c, ..., up to b.
std::vector<double> parse_sweep(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(parse_list(item).at(0));
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw InputError("sweep must be lo:hi:step with step > 0 and lo <= hi");
  }
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    // Round away representation noise so labels and inputs are stable.
    const double v = parts[0] + static_cast<double>(i) * parts[2];
    out.push_back(std::round(v * 1e12) / 1e12);
  }
  return out;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  Common c;
  double theta = 0.0;
};

int cmd_simulate(const SimulateArgs& a) {
  const auto model = load_model(a.c);
  const auto traj = simulate_path(model, a.theta, TimeGrid(a.c.steps, model.horizon()), a.c.seed);
  write_trajectory(a.c.out, traj);
  std::cout << "wrote " << (fs::path(a.c.out) / "trajectory.csv").string() << " ("
            << traj.grid.size() << " rows)\n";
  return kExitOk;
}

// ------------------------------------------------------------------ filter

struct FilterArgs {
  Common c;
  PathSource src;
  double theta = 0.0;
  bool derivative = false;
};

int cmd_filter(const FilterArgs& a) {
  const auto model = load_model(a.c);
  const auto traj = obtain_path(model, a.c, a.src);
  if (!model.contains(a.theta)) throw InputError("--theta outside [alpha, beta]");
  const auto out = run_filter(model, a.theta, traj, a.derivative);
  write_filter_csv(fs::path(a.c.out) / "filter.csv", out);
  std::cout << "m(T) = " << format_double(out.m.back())
            << "  gamma_star(T) = " << format_double(out.gamma_star.back()) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  Common c;
  PathSource src;
  double delta = 0.5;
  std::optional<double> tau;
  std::string prelim = "generic";
  bool adaptive = false;
  std::string adaptive_init = "warm";
  std::size_t mstar_every = 100;
};

int cmd_estimate(const EstimateArgs& a) {
  const auto model = load_model(a.c);
  const auto traj = obtain_path(model, a.c, a.src);
  const double tau = a.tau ? *a.tau
                           : learning_interval(model.eps(), a.delta, model.horizon(),
                                               model.theta_location(), Downstream::OneStep);
  const auto method = parse_prelim_method(a.prelim);
  const auto prelim = estimate_prelim(method, model, traj, tau);
  const auto form = model.theta_location() == ThetaLocation::InA &&
                            !model.f().depends_on_theta()
                        ? ScoreForm::ThetaFreeObservation
                        : ScoreForm::General;
  const auto one = one_step_mle(model, traj, prelim, form);
  const auto process = one_step_process(model, traj, prelim, form);

  const fs::path out(a.c.out);
  write_process_csv(out / "process.csv", process);

  if (a.mstar_every > 0) {
    std::ostringstream csv;
    csv << "t,m_star,N,G\n";
    for (std::size_t i = 0; i < process.index.size(); ++i) {
      if ((i + 1) % a.mstar_every != 0 && i + 1 != process.index.size()) continue;
      const auto r = m_star(model, traj, process, process.t[i]);
      csv << format_double(r.t) << ',' << format_double(r.m_star) << ','
          << format_double(r.N_val) << ',' << format_double(r.G_val) << '\n';
    }
    write_text(out / "mstar.csv", csv.str());
  }
  if (a.adaptive) {
    if (a.adaptive_init != "warm" && a.adaptive_init != "zero") {
      throw InputError("--adaptive-init must be warm or zero");
    }
    const auto ad = adaptive_filter(model, traj, process,
                                    a.adaptive_init == "warm" ? AdaptiveInit::WarmStart
                                                              : AdaptiveInit::ZeroVariance);
    write_adaptive_csv(out / "adaptive.csv", ad);
  }

  const json report = {{"schema", 1},
                       {"prelim_method", to_string(method)},
                       {"delta", a.tau ? json(nullptr) : json(a.delta)},
                       {"tau_eps", prelim.tau_eps},
                       {"theta_bar", prelim.theta_bar},
                       {"prelim_branch", to_string(prelim.branch)},
                       {"clamped", prelim.clamped()},
                       {"theta_star", one.theta_star},
                       {"correction", one.correction},
                       {"fisher_used", one.fisher_used},
                       {"process_final", process.theta_star_t.back()},
                       {"process_nodes", process.index.size()}};
  write_json(out / "report.json", report);
  std::cout << "theta_bar = " << format_double(prelim.theta_bar) << " ("
            << to_string(prelim.branch) << ")\n"
            << "theta_star = " << format_double(one.theta_star) << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- montecarlo

struct MonteCarloArgs {
  Common c;
  double theta = 1.0;
  double delta = 0.5;
  std::string delta_sweep;
  std::string eps_sweep;
  std::optional<double> tau;
  std::size_t reps = 100;
  std::string estimators = "prelim";
  std::string checkpoints;
  std::string prelim = "generic";
  std::string adaptive_init = "warm";
  unsigned threads = 0;
  std::string asserts;
  double delta_target = 0.4;
};

struct Assertion {
  std::string name;
  bool pass;
  std::string detail;
};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::vector<Assertion> check_assertions(const std::vector<std::string>& names,
                                        const std::vector<McReport>& reports,
                                        const std::vector<double>& deltas,
                                        const std::vector<double>& epss,
                                        double delta_target) {
  std::vector<Assertion> out;
  for (const auto& name : names) {
    if (name == "delta-optimum") {
      if (deltas.size() < 2) throw InputError("delta-optimum needs --delta-sweep");
      std::size_t best = 0;
      for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].aggregates["prelim"]["mse"].get<double>() <
            reports[best].aggregates["prelim"]["mse"].get<double>()) {
          best = i;
        }
      }
      const bool pass = std::abs(deltas[best] - delta_target) <= 0.1 + 1e-9;
      out.push_back({name, pass,
                     "argmin delta = " + label(deltas[best]) + ", target " +
                         label(delta_target) + " +/- 0.1"});
    } else if (name == "rate") {
      if (epss.size() < 3) throw InputError("rate needs --eps-sweep with >= 3 values");
      std::vector<double> x, mse;
      for (std::size_t i = 0; i < reports.size(); ++i) {
        const double e = epss[i];
        const double tau = reports[i].tau_eps;
        const double d = reports[i].config.delta;
        const bool in_f = reports[i].config.model.theta_location() == ThetaLocation::InF;
        x.push_back(in_f ? e * e / tau : std::pow(e, 2.0 - 3.0 * d));
        mse.push_back(reports[i].aggregates["prelim"]["mse"].get<double>());
      }
      const auto fit = rate_fit(x, mse);
      out.push_back({name, std::abs(fit.slope - 1.0) <= 0.2,
                     "slope = " + fixed(fit.slope) + " +/- " + fixed(fit.stderr_)});
    } else {
      for (const auto& rep : reports) {
        const auto& ag = rep.aggregates;
        const std::string at = " (eps=" + label(rep.config.model.eps()) +
                               ", delta=" + label(rep.config.delta) + ")";
        if (name == "normality" || name == "efficiency") {
          if (!ag.contains("onestep")) throw InputError(name + " needs estimator onestep");
          const auto& o = ag["onestep"];
          if (name == "normality") {
            const bool have = !o["normality"].is_null();
            const double p = have ? o["normality"]["p_value"].get<double>() : 0.0;
            out.push_back({name, have && p > 0.01, "p = " + fixed(p) + at});
          } else {
            const double r = o["variance_ratio"].get<double>();
            out.push_back({name, std::abs(r - 1.0) <= 0.15,
                           "variance / I^-1 = " + fixed(r) + at});
          }
        } else if (name == "process-variance" || name == "mstar-bound" ||
                   name == "filter-risk" || name == "adaptive-risk") {
          const char* key = name == "process-variance" ? "process"
                            : name == "mstar-bound"    ? "mstar"
                            : name == "filter-risk"    ? "filter"
                                                       : "adaptive";
          if (!ag.contains(key)) throw InputError(name + " needs estimator " + key);
          for (const auto& pt : ag[key]) {
            const double t = pt["t"].get<double>();
            const double target = pt["target"].is_null() ? NAN : pt["target"].get<double>();
            const double mse = pt["mse"].get<double>();
            const double se = pt["mse_stderr"].get<double>();
            bool pass = false;
            std::string detail;
            if (name == "process-variance") {
              const double r = pt["variance"].get<double>() / target;
              pass = std::abs(r - 1.0) <= 0.2;
              detail = "variance ratio " + fixed(r);
            } else if (name == "mstar-bound") {
              pass = mse <= 1.25 * target && mse >= target - 2.0 * se;
              detail = "mse/bound " + fixed(mse / target);
            } else if (name == "filter-risk") {
              pass = std::abs(mse - target) <= 3.0 * se;
              detail = "mse/target " + fixed(mse / target) + ", z=" + fixed((mse - target) / se);
            } else {
              pass = mse <= 1.25 * target;
              detail = "mse/target " + fixed(mse / target);
            }
            out.push_back({name, pass, detail + " at t=" + label(t) + at});
          }
        } else {
          throw InputError("unknown assertion '" + name + "'");
        }
      }
    }
  }
  return out;
}

int cmd_montecarlo(const MonteCarloArgs& a) {
  const auto base = load_model(a.c);
  if (!a.delta_sweep.empty() && !a.eps_sweep.empty()) {
    throw InputError("give at most one of --delta-sweep and --eps-sweep");
  }
  std::vector<double> deltas, epss;
  if (!a.delta_sweep.empty()) deltas = parse_sweep(a.delta_sweep);
  if (!a.eps_sweep.empty()) epss = parse_list(a.eps_sweep);

  std::vector<std::pair<double, double>> points;  // (eps, delta)
  if (!deltas.empty()) {
    for (double d : deltas) points.emplace_back(base.eps(), d);
  } else if (!epss.empty()) {
    for (double e : epss) points.emplace_back(e, a.delta);
  } else {
    points.emplace_back(base.eps(), a.delta);
  }

  std::vector<std::string> assert_names;
  {
    std::stringstream ss(a.asserts);
    std::string item;
    while (std::getline(ss, item, ',')) if (!item.empty()) assert_names.push_back(item);
  }

  const auto estimators = parse_estimators(a.estimators);
  const auto checkpoints = parse_list(a.checkpoints);
  const fs::path out(a.c.out);
  std::vector<McReport> reports;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const McConfig cfg{
        .model = base.with_eps(points[i].first),
        .theta0 = a.theta,
        .delta = points[i].second,
        .tau = a.tau,
        .n_rep = a.reps,
        .grid = TimeGrid(a.c.steps, base.horizon()),
        .base_seed = a.c.seed,
        .checkpoints = checkpoints,
        .estimators = estimators,
        .prelim_method = parse_prelim_method(a.prelim),
        .adaptive_init = a.adaptive_init == "zero" ? AdaptiveInit::ZeroVariance
                                                   : AdaptiveInit::WarmStart,
        .threads = a.threads};
    reports.push_back(run_replications(cfg));

    std::ostringstream rows;
    reports.back().write_rows_csv(rows);
    const std::string name =
        points.size() == 1 ? "rows.csv"
        : !deltas.empty()  ? "rows_delta_" + label(cfg.delta) + ".csv"
                           : "rows_eps_" + label(cfg.model.eps()) + ".csv";
    write_text(out / name, rows.str());
  }

  const auto results = check_assertions(assert_names, reports, deltas, epss, a.delta_target);

  json agg;
  if (reports.size() == 1) {
    agg = reports.front().aggregates;
  } else {
    agg["schema"] = 1;
    agg["sweep"] = !deltas.empty() ? "delta" : "eps";
    agg["points"] = json::array();
    for (const auto& r : reports) agg["points"].push_back(r.aggregates);
  }
  agg["estimators"] = to_string(estimators);
  agg["prelim_method"] = a.prelim;
  agg["base_seed"] = a.c.seed;
  agg["n_steps"] = a.c.steps;
  agg["assertions"] = json::array();
  for (const auto& r : results) {
    agg["assertions"].push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  }
  write_json(out / "aggregates.json", agg);

  bool failed = false;
  for (const auto& r : reports) {
    if (r.failed()) {
      std::cerr << "replication failures: " << r.n_failed() << " of " << r.rows.size()
                << " (> 5%)\n";
      failed = true;
    }
  }
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    failed = failed || !r.pass;
  }
  for (const auto& r : reports) {
    std::cout << "eps=" << label(r.config.model.eps()) << " delta=" << label(r.config.delta)
              << " tau=" << label(r.tau_eps) << " prelim mse="
              << fixed(r.aggregates["prelim"]["mse"].get<double>()) << "\n";
  }
  return failed ? kExitStatistical : kExitOk;
}

// ------------------------------------------------------------------- bound

struct BoundArgs {
  Common c;
  double theta = 1.0;
  std::string times;
};

int cmd_bound(const BoundArgs& a) {
  const auto model = load_model(a.c);
  const TimeGrid grid(a.c.steps, model.horizon());
  const FisherInformation info(model, a.theta, grid);
  json rows = json::array();
  for (double t : parse_list(a.times)) {
    const auto b = mse_lower_bound(model, a.theta, t, grid);
    rows.push_back({{"t", b.t}, {"bound", b.bound}, {"ydot", b.ydot}, {"fisher", b.fisher}});
    std::cout << "t=" << label(t) << " bound=" << format_double(b.bound) << "\n";
  }
  write_json(fs::path(a.c.out) / "bound.json",
             {{"schema", 1}, {"theta0", a.theta}, {"fisher_total", info.total()},
              {"bounds", rows}});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-noise estimation for partially observed linear systems"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "simulate (X, Y) on a grid");
  add_common(c_sim, sim.c);
  c_sim->add_option("--theta", sim.theta, "true parameter")->required();

  FilterArgs fil;
  auto* c_fil = app.add_subcommand("filter", "Kalman-Bucy filter at a fixed theta");
  add_common(c_fil, fil.c);
  add_source(c_fil, fil.src);
  c_fil->add_option("--theta", fil.theta, "filter parameter")->required();
  c_fil->add_flag("--derivative", fil.derivative, "also emit dm/dtheta");

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "preliminary, one-step and process estimates");
  add_common(c_est, est.c);
  add_source(c_est, est.src);
  c_est->add_option("--delta", est.delta, "learning interval exponent: tau = eps^delta");
  c_est->add_option("--tau", est.tau, "learning interval (overrides --delta)");
  c_est->add_option("--prelim", est.prelim, "generic | example1 | example2");
  c_est->add_flag("--adaptive", est.adaptive, "also run the adaptive filter");
  c_est->add_option("--adaptive-init", est.adaptive_init, "warm | zero");
  c_est->add_option("--mstar-every", est.mstar_every, "m* at every k-th process node (0: off)");

  MonteCarloArgs mc;
  auto* c_mc = app.add_subcommand("montecarlo", "replication study");
  add_common(c_mc, mc.c);
  c_mc->add_option("--theta", mc.theta, "true parameter theta0");
  c_mc->add_option("--delta", mc.delta, "learning interval exponent");
  c_mc->add_option("--delta-sweep", mc.delta_sweep, "lo:hi:step");
  c_mc->add_option("--eps-sweep", mc.eps_sweep, "comma-separated eps values");
  c_mc->add_option("--tau", mc.tau, "learning interval override");
  c_mc->add_option("--reps", mc.reps, "replications per point");
  c_mc->add_option("--estimators", mc.estimators,
                   "comma list of prelim,onestep,process,mstar,adaptive,filter,all");
  c_mc->add_option("--checkpoints", mc.checkpoints, "comma-separated times in (tau, T]");
  c_mc->add_option("--prelim", mc.prelim, "generic | example1 | example2");
  c_mc->add_option("--adaptive-init", mc.adaptive_init, "warm | zero");
  c_mc->add_option("--threads", mc.threads, "worker threads (0: all cores)");
  c_mc->add_option("--assert", mc.asserts,
                   "comma list: delta-optimum, rate, normality, efficiency, "
                   "process-variance, mstar-bound, filter-risk, adaptive-risk");
  c_mc->add_option("--delta-target", mc.delta_target, "target for delta-optimum");

  BoundArgs bnd;
  auto* c_bnd = app.add_subcommand("bound", "efficiency bound ydot^2 / I^t");
  add_common(c_bnd, bnd.c, false);
  c_bnd->add_option("--theta", bnd.theta, "theta0");
  c_bnd->add_option("--t", bnd.times, "comma-separated times")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_fil) return cmd_filter(fil);
    if (*c_est) return cmd_estimate(est);
    if (*c_mc) return cmd_montecarlo(mc);
    if (*c_bnd) return cmd_bound(bnd);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const AssumptionError& e) {
    std::cerr << "assumption violated: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
