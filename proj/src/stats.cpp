#include "perclap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace perclap::stats {

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  out.n = values.size();
  if (values.empty()) {
    out.mean = std::numeric_limits<double>::quiet_NaN();
    out.sd = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    out.sd = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

double normal_half_width(const MeanSd& ms) {
  if (ms.n < 2) return std::numeric_limits<double>::quiet_NaN();
  return kZ95 * ms.sd / std::sqrt(static_cast<double>(ms.n));
}

double wilson_half_width(double proportion, std::size_t n) {
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  const double nn = static_cast<double>(n);
  const double z2 = kZ95 * kZ95;
  const double q = std::clamp(proportion, 0.0, 1.0);
  return kZ95 / (1.0 + z2 / nn) *
         std::sqrt(q * (1.0 - q) / nn + z2 / (4.0 * nn * nn));
}

double binomial_half_width(double proportion, std::size_t n) {
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return kZ95 * std::sqrt(proportion * (1.0 - proportion) /
                          static_cast<double>(n));
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("least_squares: size mismatch");
  if (x.size() < 2) throw std::invalid_argument("least_squares: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("least_squares: degenerate abscissa");
  LineFit fit;
  fit.n = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.slope_stderr = x.size() > 2 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
  return fit;
}

}  // namespace perclap::stats
