#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kbos/error.hpp"
#include "kbos/rng.hpp"
#include "kbos/stats.hpp"

using namespace kbos;

namespace {

std::vector<double> normals(std::size_t n, double scale, std::uint64_t seed) {
  const NormalStream s(seed, 0);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = scale * s.at(i);
  return v;
}

// Textbook A^2 for a fully specified N(0, 1) null.
double a2(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
    const double w = 0.5 * std::erfc(-x[x.size() - 1 - i] / std::sqrt(2.0));
    s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(u) + std::log1p(-w));
  }
  return -n - s / n;
}

}  // namespace

TEST_CASE("summary statistics") {
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.n == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.variance == doctest::Approx(5.0 / 3.0));
  CHECK(s.mean_sq == 7.5);
  CHECK_THROWS_AS(summarize({1.0, std::nan("")}), InputError);
}

TEST_CASE("Anderson-Darling statistic matches the textbook formula") {
  const auto x = normals(500, 1.0, 3);
  const auto r = normality_check(x, 1.0);
  CHECK(r.statistic == doctest::Approx(a2(x)).epsilon(1e-10));
  auto y = x;
  for (auto& v : y) v *= 2.0;
  CHECK(normality_check(y, 4.0).statistic == doctest::Approx(r.statistic).epsilon(1e-12));
}

TEST_CASE("Anderson-Darling accepts the null and rejects a wrong scale") {
  int rejects = 0;
  for (std::uint64_t s = 1; s <= 20; ++s)
    rejects += normality_check(normals(2000, 1.0, s), 1.0).reject_01;
  CHECK(rejects <= 2);
  const auto wide = normality_check(normals(2000, 3.0, 1), 1.0);
  CHECK(wide.p_value < 0.01);
  CHECK(wide.reject_01);
}

TEST_CASE("Anderson-Darling critical values") {
  CHECK(1.0 - anderson_darling_cdf(100000, 2.492) == doctest::Approx(0.05).epsilon(0.02));
  CHECK(1.0 - anderson_darling_cdf(100000, 3.857) == doctest::Approx(0.01).epsilon(0.02));
  CHECK(anderson_darling_cdf(1000, 0.5) < anderson_darling_cdf(1000, 1.0));
}

TEST_CASE("normality check input errors") {
  CHECK_THROWS_AS(normality_check(normals(50, 1.0, 1), 1.0), InputError);
  CHECK_THROWS_AS(normality_check(std::vector<double>(200, 1.0), 1.0), InputError);
  CHECK_THROWS_AS(normality_check(normals(200, 1.0, 1), 0.0), InputError);
}

TEST_CASE("rate fit recovers exact power laws") {
  const std::vector<double> x{0.1, 0.05, 0.02, 0.01};
  for (double slope : {1.0, 2.0, 0.5}) {
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, slope));
    const auto f = rate_fit(x, y);
    CHECK(f.slope == doctest::Approx(slope).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.stderr_ <= 1e-10);
  }
  CHECK_THROWS_AS(rate_fit({0.1, 0.2}, {1.0, 2.0}), InputError);
  CHECK_THROWS_AS(rate_fit({0.1, 0.2, 0.3}, {1.0, 0.0, 2.0}), InputError);
  CHECK_THROWS_AS(rate_fit({0.1, 0.2, 0.3}, {1.0, 2.0}), InputError);
}

TEST_CASE("rate fit standard error on noisy data") {
  const auto f = rate_fit({1, 2, 4, 8}, {1.0, 2.2, 3.8, 8.4});
  CHECK(f.slope == doctest::Approx(1.0).epsilon(0.05));
  CHECK(f.stderr_ > 0.0);
}
