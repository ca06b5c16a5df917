#include "kbos/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <boost/math/statistics/anderson_darling.hpp>
#include <boost/math/statistics/linear_regression.hpp>

#include "kbos/error.hpp"

namespace kbos {

SampleStats summarize(const std::vector<double>& x) {
  SampleStats s;
  s.n = x.size();
  if (s.n == 0) return s;
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("sample contains a non-finite value");
  }
  const double n = static_cast<double>(s.n);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : x) {
    sum += v;
    sum_sq += v * v;
  }
  s.mean = sum / n;
  s.mean_sq = sum_sq / n;
  if (s.n > 1) {
    double dev = 0.0;
    double dev_sq = 0.0;
    for (double v : x) {
      dev += (v - s.mean) * (v - s.mean);
      dev_sq += (v * v - s.mean_sq) * (v * v - s.mean_sq);
    }
    s.variance = dev / (n - 1.0);
    s.mean_sq_stderr = std::sqrt(dev_sq / (n - 1.0) / n);
  }
  return s;
}

namespace {

double adinf(double z) {
  if (z < 2.0) {
    return std::exp(-1.2337141 / z) / std::sqrt(z) *
           (2.00012 +
            (0.247105 -
             (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) *
                z);
  }
  return std::exp(-std::exp(
      1.0776 -
      (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) *
          z));
}

double errfix(double n, double x) {
  if (x > 0.8) {
    return (-130.2137 +
            (745.2337 -
             (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) *
                x) /
           n;
  }
  const double c = 0.01265 + 0.1757 / n;
  if (x < c) {
    double t = x / c;
    t = std::sqrt(t) * (1.0 - t) * (49.0 * t - 102.0);
    return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
  }
  double u = (x - c) / (0.8 - c);
  u = -0.00022633 +
      (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * u) * u) * u) * u) * u;
  return u * (0.04213 + 0.01365 / n) / n;
}

constexpr double kCritical01 = 3.857;

}  // namespace

double anderson_darling_cdf(std::size_t n, double z) {
  if (!(z > 0.0)) return 0.0;
  const double x = adinf(z);
  return std::clamp(x + errfix(static_cast<double>(n), x), 0.0, 1.0);
}

NormalityResult normality_check(const std::vector<double>& samples,
                                double target_var) {
  if (samples.size() < 100) {
    throw InputError("normality check needs at least 100 samples");
  }
  if (!(target_var > 0.0) || !std::isfinite(target_var)) {
    throw InputError("normality check needs a positive target variance");
  }
  const auto st = summarize(samples);
  if (!(st.variance > 0.0)) {
    throw InputError("normality check on a degenerate (zero-variance) sample");
  }
  std::vector<double> z(samples);
  std::sort(z.begin(), z.end());
  NormalityResult r;
  r.n = z.size();
  r.statistic = boost::math::statistics::anderson_darling_normality_statistic(
      z, 0.0, std::sqrt(target_var));
  // Boost's sum hits log(0) once a sample sits where Phi rounds to 0 or 1;
  // that is a decisive rejection.
  if (!std::isfinite(r.statistic)) {
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.reject_01 = true;
    return r;
  }
  r.p_value = 1.0 - anderson_darling_cdf(r.n, r.statistic);
  r.reject_01 = r.statistic > kCritical01;
  return r;
}

RateFit rate_fit(const std::vector<double>& x_scale, const std::vector<double>& mse) {
  if (x_scale.size() != mse.size()) throw InputError("rate fit: size mismatch");
  if (x_scale.size() < 3) throw InputError("rate fit needs at least 3 points");
  const std::size_t n = x_scale.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x_scale[i] > 0.0) || !(mse[i] > 0.0) || !std::isfinite(x_scale[i]) ||
        !std::isfinite(mse[i])) {
      throw InputError("rate fit needs positive finite inputs");
    }
    lx[i] = std::log(x_scale[i]);
    ly[i] = std::log(mse[i]);
  }
  double mx = 0.0;
  for (double v : lx) mx += v;
  mx /= static_cast<double>(n);
  double sxx = 0.0;
  for (double v : lx) sxx += (v - mx) * (v - mx);
  if (!(sxx > 0.0)) throw InputError("rate fit needs distinct scale points");
  RateFit r;
  std::tie(r.intercept, r.slope) =
      boost::math::statistics::simple_ordinary_least_squares(lx, ly);
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ly[i] - (r.intercept + r.slope * lx[i]);
    ssr += e * e;
  }
  r.stderr_ = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
  return r;
}

}  // namespace kbos
