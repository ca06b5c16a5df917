#pragma once

#include <cstddef>
#include <vector>

namespace kbos {

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;        // unbiased
  double mean_sq = 0.0;         // mean of x^2
  double mean_sq_stderr = 0.0;  // standard error of mean_sq
};

// Non-finite entries are an input error.
SampleStats summarize(const std::vector<double>& x);

struct NormalityResult {
  std::size_t n = 0;
  double statistic = 0.0;  // Anderson-Darling A^2
  double p_value = 0.0;
  bool reject_01 = false;  // A^2 above the 1% critical value
};

// Anderson-Darling test of x / sqrt(target_var) against N(0, 1).
// Needs n >= 100 and a nondegenerate sample.
NormalityResult normality_check(const std::vector<double>& samples,
                                double target_var);

// P(A^2 <= z) for a fully specified null with n observations
// (Marsaglia & Marsaglia 2004 approximation).
double anderson_darling_cdf(std::size_t n, double z);

struct RateFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;
};

// Least-squares fit of log(mse) against log(x_scale).
RateFit rate_fit(const std::vector<double>& x_scale, const std::vector<double>& mse);

}  // namespace kbos
