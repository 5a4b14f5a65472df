#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rugbayes/model.hpp"
#include "rugbayes/sampler.hpp"

namespace rugbayes {

// Replicated standardized score differences, replications x games.
struct ReplicationSet {
  std::size_t replications = 0;
  std::size_t games = 0;
  std::vector<double> values;
  std::vector<double> observed;
  std::vector<double> pvalues;    // per game
  std::vector<double> pred_mean;  // per game
  std::vector<double> pred_sd;    // per game
  std::vector<double> rep_mean;   // per replication
  std::vector<double> rep_sd;     // per replication

  double at(std::size_t rep, std::size_t game) const { return values[rep * games + game]; }
  std::vector<double> game_column(std::size_t game) const;
  std::span<const double> replication(std::size_t rep) const { return {values.data() + rep * games, games}; }
};

// One Student-t draw per (stored draw, game). With n_replications larger
// than the number of stored draws the draws are reused cyclically with fresh
// noise. Replication r uses its own generator stream derived from (seed, r).
ReplicationSet replicate_scores(const DrawsMatrix& draws, const ScoreModel& model, std::uint64_t seed,
                                std::optional<std::size_t> n_replications = std::nullopt);

// Fraction of replications below the observation, ties counted half.
double ppc_pvalue(std::span<const double> replications, double observed);

enum class Side { low, high };
std::string_view to_string(Side side);

struct OutlierFlag {
  std::size_t game = 0;  // 0-based
  double pvalue = 0.0;
  Side side = Side::low;
};

// Games with min(p, 1 - p) < alpha, most extreme first. alpha >= 0.5 flags
// every game.
std::vector<OutlierFlag> flag_outliers(const ReplicationSet& reps, double alpha = 0.005);

struct LuckDecomposition {
  double var_performance = 0.0;
  double var_luck = 0.0;
  double var_effort = 0.0;
  double var_ability = 0.0;
  double p = 0.5;
  int g = 0;
  bool ability_negative = false;
};

// var_ability = var_performance - var_luck - var_effort with the binomial
// luck variance p (1 - p) / g.
LuckDecomposition decompose_variance(double var_performance, double var_effort, int g, double p = 0.5);

// Performance variance candidates under the conventions in use for
// "variance of games won".
struct PerformanceConventions {
  double fraction_sample = 0.0;      // wins / g, n - 1 denominator
  double fraction_population = 0.0;  // wins / g, n denominator
  double count_sample = 0.0;         // wins, n - 1 denominator
  double count_population = 0.0;     // wins, n denominator
};

PerformanceConventions performance_conventions(std::span<const double> wins, int g);

// wins: games won per team (draws may count 0.5); efforts: pooled per-game
// team effort ratios. Uses win fractions wins / g and n - 1 denominators.
LuckDecomposition luck_decomposition(std::span<const double> wins, std::span<const double> efforts, int g, double p = 0.5);

void write_ppc_csv(std::ostream& out, const ReplicationSet& reps, double alpha);

}  // namespace rugbayes
