#include "rugbayes/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rugbayes::special {
namespace {

constexpr double kAsymptoticCutoff = 15.0;

// Stirling remainder S(z) = lgamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2].
double stirling_remainder(double z) {
  const double r = 1.0 / z;
  const double r2 = r * r;
  return r * (1.0 / 12.0 +
              r2 * (-1.0 / 360.0 +
                    r2 * (1.0 / 1260.0 +
                          r2 * (-1.0 / 1680.0 +
                                r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360360.0 + r2 * (1.0 / 156.0)))))));
}

// digamma(z) - ln z for large z.
double digamma_remainder(double z) {
  const double r = 1.0 / z;
  const double r2 = r * r;
  return -0.5 * r -
         r2 * (1.0 / 12.0 -
               r2 * (1.0 / 120.0 -
                     r2 * (1.0 / 252.0 - r2 * (1.0 / 240.0 - r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0))))));
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(x)) return x;
  double shift = 0.0;
  // Accumulate the product of the shifted arguments and take a single log,
  // rescaling before overflow.
  double product = 1.0;
  while (x < kAsymptoticCutoff) {
    product *= x;
    if (product > 1e280) {
      shift += std::log(product);
      product = 1.0;
    }
    x += 1.0;
  }
  shift += std::log(product);
  const double base = (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi);
  return base + stirling_remainder(x) - shift;
}

double digamma(double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  while (x < kAsymptoticCutoff) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  return acc + std::log(x) + digamma_remainder(x);
}

double log_gamma_half_ratio(double x) {
  if (x < kAsymptoticCutoff) return log_gamma(x + 0.5) - log_gamma(x);
  // x ln(x + 1/2) - (x - 1/2) ln x - 1/2 rewritten around log1p.
  const double lead = x * std::log1p(0.5 / x) + 0.5 * std::log(x) - 0.5;
  return lead + (stirling_remainder(x + 0.5) - stirling_remainder(x));
}

double digamma_half_diff(double x) {
  if (x < kAsymptoticCutoff) return digamma(x + 0.5) - digamma(x);
  return std::log1p(0.5 / x) + (digamma_remainder(x + 0.5) - digamma_remainder(x));
}

}  // namespace rugbayes::special
