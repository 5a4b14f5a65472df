#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rugbayes/sampler.hpp"

namespace rugbayes {

using ChainDraws = std::vector<std::vector<double>>;

// Potential scale reduction over split half-chains:
//   sqrt((W (n - 1) / n + B / n) / W).
// Empty when fewer than 4 draws per half are available or every half has
// zero variance.
std::optional<double> split_rhat(const ChainDraws& chains);

// Effective sample size from split half-chains using Geyer's initial
// positive (monotone) sequence on the combined autocorrelation. Empty under
// the same conditions as split_rhat.
std::optional<double> effective_sample_size(const ChainDraws& chains);

struct SummaryRow {
  std::string param;
  std::optional<double> rhat;
  std::optional<double> n_eff;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
};

SummaryRow summarize_param(const std::string& name, const ChainDraws& chains);

// Top-level parameters in table order (b_home, b_prev, b_atten, b_effort,
// b_day, nu, sigma_y; absent ones skipped), then sigma_a and eta when
// include_latent is set.
std::vector<SummaryRow> summarize(const DrawsMatrix& draws, bool include_latent = false);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace rugbayes
