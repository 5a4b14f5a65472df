#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "rugbayes/features.hpp"
#include "rugbayes/ingest.hpp"
#include "rugbayes/model.hpp"

namespace rugbayes {

// Per-side effort law: an effort propensity p ~ Beta(alpha, beta), then
// `attempts` scoring opportunities of which Binomial(attempts, p) are tries
// and the rest kick attempts.
struct EffortLaw {
  double alpha = 5.0;
  double beta = 8.0;
  int attempts = 8;
};

struct SimConfig {
  int nteams = 12;
  int nrounds = 22;
  Variant variant = Variant::I;
  double b_home = 0.35;
  double b_prev = 1.7;
  double b_effort = 3.0;
  double b_atten = 0.0;
  double b_day = 0.0;
  double nu = 12.0;
  double sigma_y = 1.6;
  // Per-team random-walk scales; empty means 0.05 for every team.
  std::vector<double> sigma_a;
  double eta_sd = 0.5;
  EffortLaw home_effort;
  EffortLaw away_effort;
  double attendance_prob = 0.5;
  double weekend_prob = 0.7;
  // Points per standardized unit used for the raw-scale view.
  double points_scale = 10.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimTruth {
  SimConfig config;
  std::vector<double> sigma_a;
  std::vector<double> prevperf;
  std::vector<double> eta;        // nweeks x nteams, row-major by week
  std::vector<double> abilities;  // nweeks x nteams
  std::vector<double> location;   // per game, standardized units

  nlohmann::json to_json() const;
};

struct SimulatedSeason {
  Dataset dataset;  // carries y_raw
  PrevSeasonTable prev;
  FeatureSet features;  // y in standardized units, scale = points_scale
  SimTruth truth;
};

// Double round-robin by the circle method; round r pairs are reversed
// home/away in the second cycle.
std::vector<std::pair<int, int>> round_robin_round(int nteams, int round);

SimulatedSeason simulate_season(const SimConfig& config);

nlohmann::json to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& j);

}  // namespace rugbayes
