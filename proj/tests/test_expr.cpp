#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbos/error.hpp"
#include "kbos/expr.hpp"

using kbos::Expr;
using nlohmann::json;

TEST_CASE("expr evaluates constants, time and theta") {
  CHECK(Expr::constant(3.0)(0.7, 0.2) == 3.0);
  CHECK(Expr::from_json(json::parse(R"(["*", "theta", "t"])"))(2.0, 0.5) == 1.0);
  CHECK(Expr::from_json(json::parse(R"(["*", "theta", ["exp", "t"]])"))(1.5, 0.0) ==
        1.5);
  const Expr p = Expr::pow(Expr::time() + Expr::constant(1.0), 2.5);
  CHECK(p(0.0, 3.0) == doctest::Approx(32.0).epsilon(1e-15));
}

TEST_CASE("expr minus forms") {
  const Expr neg = Expr::from_json(json::parse(R"(["-", "theta"])"));
  CHECK(neg(2.0, 0.0) == -2.0);
  const Expr diff = Expr::from_json(json::parse(R"(["-", "t", 0.25])"));
  CHECK(diff(0.0, 1.0) == 0.75);
}

TEST_CASE("structural derivatives match central differences") {
  const std::vector<const char*> corpus = {
      R"(["*", "theta", "t"])",
      R"(["*", "theta", ["exp", ["*", -1.0, "t"]]])",
      R"(["+", ["pow", "theta", 3.0], ["*", 2.0, "t", "theta"]])",
      R"(["exp", ["*", "theta", "theta", "t"]])",
      R"(["pow", ["+", 1.0, ["*", "theta", "t"]], -0.5])",
      R"(["*", ["+", 1.0, "t"], ["pow", "theta", 2.0], ["exp", "t"]])",
  };
  const double dh = 1e-5;
  for (const char* src : corpus) {
    CAPTURE(src);
    const Expr e = Expr::from_json(json::parse(src));
    const Expr et = e.d_theta();
    const Expr ett = e.d_t();
    for (double th : {0.6, 1.0, 1.4}) {
      for (double t : {0.1, 0.5, 0.9}) {
        const double fd_th = (e(th + dh, t) - e(th - dh, t)) / (2 * dh);
        const double fd_t = (e(th, t + dh) - e(th, t - dh)) / (2 * dh);
        CHECK(et(th, t) == doctest::Approx(fd_th).epsilon(1e-8));
        CHECK(ett(th, t) == doctest::Approx(fd_t).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("dependency flags") {
  const Expr e = Expr::from_json(json::parse(R"(["*", 2.0, "t"])"));
  CHECK_FALSE(e.depends_on_theta());
  CHECK(e.depends_on_time());
  CHECK(e.d_theta().is_constant());
  CHECK(e.d_theta().constant_value() == 0.0);
  CHECK(Expr::theta().d_theta().constant_value() == 1.0);
}

TEST_CASE("json round trip preserves values") {
  const Expr e = Expr::from_json(
      json::parse(R"(["+", ["*", 0.1, "theta", ["exp", "t"]], ["pow", "t", 1.5]])"));
  const Expr back = Expr::from_json(e.to_json());
  for (double th : {0.5, 1.2})
    for (double t : {0.0, 0.3, 1.0}) CHECK(back(th, t) == e(th, t));
}

TEST_CASE("malformed expressions are input errors") {
  CHECK_THROWS_AS(Expr::from_json(json::parse(R"("x")")), kbos::InputError);
  CHECK_THROWS_AS(Expr::from_json(json::parse(R"(["sin", "t"])")), kbos::InputError);
  CHECK_THROWS_AS(Expr::from_json(json::parse(R"(["exp", "t", "t"])")),
                  kbos::InputError);
  CHECK_THROWS_AS(Expr::from_json(json::parse(R"(["pow", "t", "theta"])")),
                  kbos::InputError);
  CHECK_THROWS_AS(Expr::from_json(json::parse(R"(["+"])")), kbos::InputError);
  CHECK_THROWS_AS(Expr::from_json(json::parse(R"({"a": 1})")), kbos::InputError);
  CHECK_THROWS_AS(Expr::constant(std::nan("")), kbos::InputError);
}

TEST_CASE("nesting deeper than the evaluation stack is rejected") {
  auto nest = [](int levels) {
    json j = "theta";
    for (int i = 0; i < levels; ++i) j = json::array({"*", "t", json::array({"exp", j})});
    return j;
  };
  CHECK_NOTHROW(Expr::from_json(nest(20)));
  CHECK_THROWS_AS(Expr::from_json(nest(100)), kbos::InputError);
}
