#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rugbayes/ingest.hpp"

namespace rugbayes {

// Model-ready covariates of one played game. Team indices are 0-based,
// week indices are 1-based per-team match counters.
struct GameObservation {
  int home_idx = 0;
  int away_idx = 0;
  int home_week = 1;
  int away_week = 1;
  double y = 0.0;         // standardized home - away difference
  double raw_diff = 0.0;  // points
  double eff_home = 0.0;
  double eff_away = 0.0;
  int atten = 0;
  int day = 0;
};

struct FeatureSet {
  std::vector<GameObservation> observations;
  std::vector<double> prevperf;
  int nteams = 0;
  int nweeks = 0;
  double scale = 1.0;  // points per standardized unit

  std::size_t ngames() const { return observations.size(); }
};

// tries / (tries + attempted kicks); 0 when nothing was attempted.
double compute_effort(int tries, int conv_att, int pen_att, int drop_att);

// Averaged attack (descending scored) and defence (ascending received)
// ranks, each mapped to [0, 1] with the best team at 1. Teams missing from
// the table get 0.5. Throws InputError when the table has fewer than 2 rows.
std::vector<double> compute_prevperf(const PrevSeasonTable& table, std::span<const std::string> teams);

// Per-team played-match counters for every game, processed in round order
// (stable within a round).
std::vector<std::pair<int, int>> assign_week_indices(const Dataset& dataset);

struct Standardized {
  std::vector<double> y;
  double scale = 1.0;
};

// Divides by the sample standard deviation; no centering. Throws
// NumericError for fewer than two values or zero variance.
Standardized standardize_diffs(std::span<const double> raw);

// Runs the full covariate pipeline. When scale is given it is used instead of
// the sample standard deviation of the raw differences.
FeatureSet build_features(const Dataset& dataset, const PrevSeasonTable& prev, std::optional<double> scale = std::nullopt);

struct ColumnSummary {
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

struct SideSummary {
  ColumnSummary score, tries, conv_att, pen_att, drop_att, effort;
};

struct EffortSummary {
  SideSummary home;
  SideSummary away;
};

// Linear-interpolation quantile of sorted data, p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);
ColumnSummary summarize_column(std::vector<double> values);

EffortSummary summarize_features(const Dataset& dataset, const FeatureSet& features);

void write_effort_summary(std::ostream& out, const EffortSummary& summary);
void write_feature_dump(std::ostream& out, const Dataset& dataset, const FeatureSet& features);

}  // namespace rugbayes
