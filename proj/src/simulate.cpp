#include "rugbayes/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "rugbayes/errors.hpp"
#include "rugbayes/sampler.hpp"

namespace rugbayes {
namespace {

constexpr std::string_view kModule = "simulate";

std::string team_name(int i) {
  std::string digits = std::to_string(i + 1);
  if (digits.size() < 2) digits.insert(0, "0");
  return "Team" + digits;
}

double draw_beta(double alpha, double beta, Rng& rng) {
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

struct SideCounts {
  int tries = 0;
  int conv_att = 0;
  int pen_att = 0;
  int drop_att = 0;
};

SideCounts draw_counts(const EffortLaw& law, Rng& rng) {
  const double p = draw_beta(law.alpha, law.beta, rng);
  std::binomial_distribution<int> tries(law.attempts, p);
  SideCounts c;
  c.tries = tries(rng);
  const int kicks = law.attempts - c.tries;
  c.conv_att = std::min(c.tries, kicks);
  const int rest = kicks - c.conv_att;
  std::binomial_distribution<int> drops(rest, 0.1);
  c.drop_att = drops(rng);
  c.pen_att = rest - c.drop_att;
  return c;
}

}  // namespace

void SimConfig::validate() const {
  if (nteams < 2 || nteams % 2 != 0) throw InputError(kModule, "nteams must be even and at least 2");
  if (nrounds < 1) throw InputError(kModule, "nrounds must be positive");
  if (!(nu > 0.0) || !(sigma_y > 0.0)) throw InputError(kModule, "nu and sigma_y must be positive");
  if (!sigma_a.empty() && static_cast<int>(sigma_a.size()) != nteams) throw InputError(kModule, "sigma_a needs one entry per team");
  if (!(eta_sd >= 0.0)) throw InputError(kModule, "eta_sd must be nonnegative");
  for (const auto* law : {&home_effort, &away_effort}) {
    if (!(law->alpha > 0.0) || !(law->beta > 0.0) || law->attempts < 0) throw InputError(kModule, "invalid effort law");
  }
  for (const double pr : {attendance_prob, weekend_prob}) {
    if (!(pr >= 0.0 && pr <= 1.0)) throw InputError(kModule, "probabilities must lie in [0, 1]");
  }
  if (!(points_scale > 0.0)) throw InputError(kModule, "points_scale must be positive");
}

std::vector<std::pair<int, int>> round_robin_round(int nteams, int round) {
  const int cycle = nteams - 1;
  const int r = round % cycle;
  const bool reversed = (round / cycle) % 2 == 1;
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(nteams));
  order.push_back(nteams - 1);
  for (int k = 0; k < cycle; ++k) order.push_back((k + r) % cycle);

  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k < nteams / 2; ++k) {
    int home = order[static_cast<std::size_t>(k)];
    int away = order[static_cast<std::size_t>(nteams - 1 - k)];
    // Alternate the fixed team's venue and mirror the rest.
    const bool swap = k == 0 ? (r % 2 == 1) : (k % 2 == 1);
    if (swap) std::swap(home, away);
    if (reversed) std::swap(home, away);
    pairs.emplace_back(home, away);
  }
  return pairs;
}

SimulatedSeason simulate_season(const SimConfig& config) {
  config.validate();
  const int nt = config.nteams;
  const int nw = config.nrounds;
  Rng rng = make_stream(config.seed, 0x5EA5011ULL);
  std::normal_distribution<double> eta_dist(0.0, 1.0);

  SimTruth truth;
  truth.config = config;
  truth.sigma_a = config.sigma_a.empty() ? std::vector<double>(static_cast<std::size_t>(nt), 0.05) : config.sigma_a;

  SimulatedSeason season;
  for (int i = 0; i < nt; ++i) {
    season.prev.rows.push_back({team_name(i), 10.0 * (nt - i), 10.0 * (i + 1)});
    truth.prevperf.push_back(static_cast<double>(nt - 1 - i) / static_cast<double>(nt - 1));
  }

  truth.eta.resize(static_cast<std::size_t>(nw) * nt);
  for (auto& e : truth.eta) e = config.eta_sd * eta_dist(rng);
  truth.abilities.resize(truth.eta.size());
  auto cell = [nt](int week, int team) { return static_cast<std::size_t>(week - 1) * static_cast<std::size_t>(nt) + static_cast<std::size_t>(team); };
  for (int t = 0; t < nt; ++t) truth.abilities[cell(1, t)] = config.b_prev * truth.prevperf[t] + truth.eta[cell(1, t)];
  for (int w = 2; w <= nw; ++w) {
    for (int t = 0; t < nt; ++t) {
      truth.abilities[cell(w, t)] = truth.abilities[cell(w - 1, t)] + truth.sigma_a[t] * truth.eta[cell(w, t)];
    }
  }

  const bool use_atten = config.variant != Variant::I;
  const bool use_day = config.variant == Variant::III || config.variant == Variant::IV;
  std::bernoulli_distribution atten_dist(config.attendance_prob);
  std::bernoulli_distribution day_dist(config.weekend_prob);
  std::student_t_distribution<double> noise(config.nu);

  // Relabel schedule slots so team k is the k-th to appear; a parsed
  // dataset orders teams by first appearance, so indices then agree.
  std::vector<int> label(static_cast<std::size_t>(nt), -1);
  int next_label = 0;
  for (int round = 0; round < nw && next_label < nt; ++round) {
    for (const auto& [h, a] : round_robin_round(nt, round)) {
      for (const int slot : {h, a}) {
        if (label[static_cast<std::size_t>(slot)] < 0) label[static_cast<std::size_t>(slot)] = next_label++;
      }
    }
  }

  std::vector<int> played(static_cast<std::size_t>(nt), 0);
  for (int round = 0; round < nw; ++round) {
    for (const auto& [home_slot, away_slot] : round_robin_round(nt, round)) {
      const int home = label[static_cast<std::size_t>(home_slot)];
      const int away = label[static_cast<std::size_t>(away_slot)];
      MatchRecord m;
      m.round = round + 1;
      m.home_team = team_name(home);
      m.away_team = team_name(away);
      const auto hc = draw_counts(config.home_effort, rng);
      const auto ac = draw_counts(config.away_effort, rng);
      m.home_tries = hc.tries;
      m.home_conv_att = hc.conv_att;
      m.home_pen_att = hc.pen_att;
      m.home_drop_att = hc.drop_att;
      m.away_tries = ac.tries;
      m.away_conv_att = ac.conv_att;
      m.away_pen_att = ac.pen_att;
      m.away_drop_att = ac.drop_att;
      m.attendance = atten_dist(rng);
      m.weekend = day_dist(rng);

      const int hw = ++played[static_cast<std::size_t>(home)];
      const int aw = ++played[static_cast<std::size_t>(away)];
      const double eff_diff = compute_effort(hc.tries, hc.conv_att, hc.pen_att, hc.drop_att) -
                              compute_effort(ac.tries, ac.conv_att, ac.pen_att, ac.drop_att);
      double mu = truth.abilities[cell(hw, home)] - truth.abilities[cell(aw, away)] + config.b_effort * eff_diff + config.b_home;
      if (use_atten) mu += config.b_atten * (m.attendance ? 1.0 : 0.0);
      if (use_day) mu += config.b_day * (m.weekend ? 1.0 : 0.0);
      const double y = mu + config.sigma_y * noise(rng);
      truth.location.push_back(mu);

      m.y_raw = y * config.points_scale;
      // Scores are indicative only; y_raw is the observed outcome.
      const long diff = std::lround(*m.y_raw);
      const int base = 10 + 5 * std::min(hc.tries, ac.tries);
      m.home_score = base + static_cast<int>(std::max(diff, 0L));
      m.away_score = base + static_cast<int>(std::max(-diff, 0L));
      season.dataset.matches.push_back(std::move(m));
    }
  }
  for (const auto& m : season.dataset.matches) {
    for (const auto* name : {&m.home_team, &m.away_team}) {
      if (season.dataset.team_index(*name) < 0) season.dataset.teams.push_back(*name);
    }
  }
  season.features = build_features(season.dataset, season.prev, config.points_scale);
  season.truth = std::move(truth);
  return season;
}

nlohmann::json to_json(const SimConfig& c) {
  auto law = [](const EffortLaw& l) { return nlohmann::json{{"alpha", l.alpha}, {"beta", l.beta}, {"attempts", l.attempts}}; };
  return nlohmann::json{{"nteams", c.nteams},
                        {"nrounds", c.nrounds},
                        {"model", std::string(to_string(c.variant))},
                        {"b_home", c.b_home},
                        {"b_prev", c.b_prev},
                        {"b_effort", c.b_effort},
                        {"b_atten", c.b_atten},
                        {"b_day", c.b_day},
                        {"nu", c.nu},
                        {"sigma_y", c.sigma_y},
                        {"sigma_a", c.sigma_a},
                        {"eta_sd", c.eta_sd},
                        {"home_effort", law(c.home_effort)},
                        {"away_effort", law(c.away_effort)},
                        {"attendance_prob", c.attendance_prob},
                        {"weekend_prob", c.weekend_prob},
                        {"points_scale", c.points_scale},
                        {"seed", c.seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  try {
    c.nteams = j.value("nteams", c.nteams);
    c.nrounds = j.value("nrounds", c.nrounds);
    if (j.contains("model")) c.variant = parse_variant(j.at("model").get<std::string>());
    c.b_home = j.value("b_home", c.b_home);
    c.b_prev = j.value("b_prev", c.b_prev);
    c.b_effort = j.value("b_effort", c.b_effort);
    c.b_atten = j.value("b_atten", c.b_atten);
    c.b_day = j.value("b_day", c.b_day);
    c.nu = j.value("nu", c.nu);
    c.sigma_y = j.value("sigma_y", c.sigma_y);
    c.sigma_a = j.value("sigma_a", c.sigma_a);
    c.eta_sd = j.value("eta_sd", c.eta_sd);
    for (auto [key, law] : {std::pair{"home_effort", &c.home_effort}, std::pair{"away_effort", &c.away_effort}}) {
      if (!j.contains(key)) continue;
      const auto& l = j.at(key);
      law->alpha = l.value("alpha", law->alpha);
      law->beta = l.value("beta", law->beta);
      law->attempts = l.value("attempts", law->attempts);
    }
    c.attendance_prob = j.value("attendance_prob", c.attendance_prob);
    c.weekend_prob = j.value("weekend_prob", c.weekend_prob);
    c.points_scale = j.value("points_scale", c.points_scale);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(kModule, std::string("bad simulation config: ") + e.what());
  }
  return c;
}

nlohmann::json SimTruth::to_json() const {
  const int nt = config.nteams;
  nlohmann::json j;
  j["config"] = rugbayes::to_json(config);
  nlohmann::json teams = nlohmann::json::array();
  for (int t = 0; t < nt; ++t) {
    const std::string name = team_name(t);
    nlohmann::json ab = nlohmann::json::array();
    for (int w = 1; w <= config.nrounds; ++w) ab.push_back(abilities[static_cast<std::size_t>(w - 1) * nt + t]);
    teams.push_back({{"team", name}, {"prevperf", prevperf[t]}, {"sigma_a", sigma_a[t]}, {"abilities", ab}});
  }
  j["teams"] = teams;
  j["location"] = location;
  return j;
}

}  // namespace rugbayes
