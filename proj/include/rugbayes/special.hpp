#pragma once

// Log-gamma and digamma for positive real arguments. Both use upward
// recurrence into the asymptotic region followed by the Stirling series, so
// they are reentrant (unlike ::lgamma, which writes the global signgam).

namespace rugbayes::special {

double log_gamma(double x);
double digamma(double x);

// lgamma(x + 1/2) - lgamma(x), accurate for large x where the direct
// difference cancels.
double log_gamma_half_ratio(double x);

// digamma(x + 1/2) - digamma(x), same treatment.
double digamma_half_diff(double x);

}  // namespace rugbayes::special
