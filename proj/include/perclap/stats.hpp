#pragma once

#include <cstddef>
#include <span>

namespace perclap::stats {

inline constexpr double kZ95 = 1.959963984540054;

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); NaN when n < 2
  std::size_t n = 0;
};

/// Sums in index order, so results are reproducible bit for bit.
MeanSd mean_sd(std::span<const double> values);

/// 95% normal-approximation half-width of the mean.
double normal_half_width(const MeanSd& ms);

/// Half the length of the 95% Wilson score interval for a proportion.
double wilson_half_width(double proportion, std::size_t n);

/// 95% half-width of a binomial frequency estimate.
double binomial_half_width(double proportion, std::size_t n);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x. Requires n >= 2.
LineFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace perclap::stats
