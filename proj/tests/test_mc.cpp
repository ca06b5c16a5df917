#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "kbos/error.hpp"
#include "kbos/fisher.hpp"
#include "kbos/mc.hpp"

using namespace kbos;

namespace {

McConfig base(const ModelSpec& m) {
  return McConfig{.model = m,
                  .theta0 = 1.0,
                  .delta = 0.5,
                  .tau = std::nullopt,
                  .n_rep = 20,
                  .grid = TimeGrid(1000, 1.0),
                  .base_seed = 1,
                  .checkpoints = {0.5, 1.0},
                  .estimators = parse_estimators("all"),
                  .prelim_method = PrelimMethod::Generic,
                  .adaptive_init = AdaptiveInit::WarmStart,
                  .threads = 2};
}

std::string rows_csv(const McReport& r) {
  std::ostringstream os;
  r.write_rows_csv(os);
  return os.str();
}

}  // namespace

TEST_CASE("estimator lists") {
  const auto all = parse_estimators("all");
  CHECK(all.prelim);
  CHECK(all.onestep);
  CHECK(all.mstar);
  CHECK(all.filter);
  const auto some = parse_estimators("onestep,mstar");
  CHECK(some.prelim);
  CHECK(some.onestep);
  CHECK_FALSE(some.adaptive);
  CHECK(some.needs_process());
  CHECK(parse_estimators(to_string(some)).mstar);
  CHECK_FALSE(parse_estimators("prelim").needs_full_path());
  CHECK_THROWS_AS(parse_estimators("prelim,bogus"), InputError);
}

TEST_CASE("config validation") {
  auto cfg = base(fx::toy());
  CHECK_NOTHROW(cfg.validate());
  cfg.n_rep = 1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = base(fx::toy());
  cfg.theta0 = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = base(fx::toy());
  cfg.checkpoints = {0.05};
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = base(fx::toy());
  cfg.grid = TimeGrid(1000, 2.0);
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = base(fx::toy(0.0));
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.tau = 0.1;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("replications are deterministic and independent of the thread count") {
  auto cfg = base(fx::rich());
  const auto a = run_replications(cfg);
  cfg.threads = 1;
  const auto b = run_replications(cfg);
  cfg.threads = 4;
  const auto c = run_replications(cfg);
  CHECK(rows_csv(a) == rows_csv(b));
  CHECK(rows_csv(a) == rows_csv(c));
  CHECK(a.aggregates.dump() == b.aggregates.dump());
  CHECK(a.n_failed() == 0);
  REQUIRE(a.rows.size() == 20);
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].seed == 1 + i);
}

TEST_CASE("noise-free replications have no spread") {
  auto cfg = base(fx::ex1(0.0));
  cfg.tau = 0.1;
  cfg.n_rep = 3;
  const auto r = run_replications(cfg);
  for (const auto& row : r.rows) {
    CHECK(row.ok);
    CHECK(row.theta_star == r.rows[0].theta_star);
    CHECK(std::abs(row.theta_star - 1.0) <= 1e-3);
  }
  CHECK(r.aggregates["onestep"]["scaled_variance"].get<double>() == 0.0);
  CHECK(r.aggregates["scale"].get<double>() == 1.0);
}

TEST_CASE("aggregates agree with the rows") {
  auto cfg = base(fx::toy());
  cfg.n_rep = 200;
  const auto r = run_replications(cfg);
  std::vector<double> e;
  for (const auto& row : r.rows) e.push_back((row.theta_star - 1.0) / 0.01);
  const auto s = summarize(e);
  CHECK(r.aggregates["onestep"]["scaled_variance"].get<double>() == s.variance);
  CHECK(r.aggregates["onestep"]["target_variance"].get<double>() ==
        1.0 / FisherInformation(cfg.model, 1.0, cfg.grid).total());
  CHECK(r.aggregates["process"].size() == 2);
  CHECK(r.aggregates["n_ok"].get<std::size_t>() == 200);
  CHECK(r.aggregates == aggregate(cfg, r.rows, r.tau_eps));
}

TEST_CASE("one-step estimate is unbiased") {
  auto cfg = base(fx::toy());
  cfg.estimators = parse_estimators("onestep");
  cfg.prelim_method = PrelimMethod::Example1;
  cfg.n_rep = 2000;
  cfg.delta = 0.8;
  cfg.threads = 0;
  const auto r = run_replications(cfg);
  const auto& o = r.aggregates["onestep"];
  const double sd = std::sqrt(o["scaled_variance"].get<double>());
  // O(h) filter bias on the eps^-1 scale: h / eps = 0.1
  CHECK(std::abs(o["scaled_mean"].get<double>()) <= 3.0 * sd / std::sqrt(2000.0) + 0.1);
}

TEST_CASE("failed replications are counted and left out of the aggregates") {
  auto cfg = base(fx::toy());
  cfg.n_rep = 40;
  auto r = run_replications(cfg);
  r.rows[3].ok = false;
  r.rows[3].error = "NumericalError: injected";
  CHECK(r.n_failed() == 1);
  CHECK_FALSE(r.failed());
  const auto j = aggregate(cfg, r.rows, r.tau_eps);
  CHECK(j["n_failed"].get<std::size_t>() == 1);
  CHECK(j["n_ok"].get<std::size_t>() == 39);
  r.rows[4].ok = false;
  r.rows[5].ok = false;
  CHECK(r.failed());
  const std::string csv = rows_csv(r);
  CHECK(csv.find("injected") != std::string::npos);
}

TEST_CASE("worker count honours the environment cap") {
  CHECK(worker_count(3) >= 1);
  setenv("KB_ONESTEP_THREADS", "1", 1);
  CHECK(worker_count(8) == 1);
  unsetenv("KB_ONESTEP_THREADS");
}
