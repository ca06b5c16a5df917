#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbos/model.hpp"
#include "kbos/onestep.hpp"
#include "kbos/prelim.hpp"
#include "kbos/stats.hpp"

namespace kbos {

// Estimators evaluated per replication.
struct EstimatorSet {
  bool prelim = true;
  bool onestep = false;
  bool process = false;
  bool mstar = false;
  bool adaptive = false;
  bool filter = false;  // oracle filter at theta0, for the risk identity

  bool needs_full_path() const {
    return onestep || process || mstar || adaptive || filter;
  }
  bool needs_process() const { return process || mstar || adaptive; }
};

// Parses a comma list such as "prelim,onestep,mstar" ("all" selects every one).
EstimatorSet parse_estimators(const std::string& list);
std::string to_string(const EstimatorSet& set);

struct McConfig {
  ModelSpec model;
  double theta0 = 1.0;
  double delta = 0.5;
  std::optional<double> tau;  // overrides eps^delta, required when eps = 0
  std::size_t n_rep = 2;
  TimeGrid grid{10000, 1.0};
  std::uint64_t base_seed = 1;
  std::vector<double> checkpoints;
  EstimatorSet estimators;
  PrelimMethod prelim_method = PrelimMethod::Generic;
  AdaptiveInit adaptive_init = AdaptiveInit::WarmStart;
  unsigned threads = 0;  // 0: hardware concurrency, capped by KB_ONESTEP_THREADS

  // Throws InputError on n_rep < 2, theta0 outside (alpha, beta), or
  // checkpoints outside (tau, T].
  void validate() const;
  double learning_tau() const;
};

// One replication. Errors are stored as differences from the truth:
//   prelim/onestep: estimate - theta0
//   process:        theta*_t - theta0 at each checkpoint
//   mstar:          m*(t) - m(theta0, t)
//   adaptive:       adaptive mean - Y_t
//   filter:         m(theta0, t) - Y_t
struct McRow {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double theta_bar = 0.0;
  bool clamped = false;
  double theta_star = 0.0;
  std::vector<double> process;
  std::vector<double> mstar_err;
  std::vector<double> adaptive_err;
  std::vector<double> filter_err;
};

struct McReport {
  McConfig config;
  double tau_eps = 0.0;  // grid-snapped
  std::size_t tau_index = 0;
  std::vector<McRow> rows;
  nlohmann::json aggregates;

  std::size_t n_failed() const;
  double failure_fraction() const;
  // More than 5% of replications failed.
  bool failed() const { return failure_fraction() > 0.05; }

  void write_rows_csv(std::ostream& os) const;
};

// Replications for seeds base_seed .. base_seed + n_rep - 1, run in parallel,
// aggregated in seed order.
McReport run_replications(const McConfig& cfg);

// Recomputes the aggregate block from rows (also used by run_replications).
nlohmann::json aggregate(const McConfig& cfg, const std::vector<McRow>& rows,
                         double tau_eps);

// Worker count: cfg value or hardware concurrency, capped by KB_ONESTEP_THREADS.
unsigned worker_count(unsigned requested);

}  // namespace kbos
