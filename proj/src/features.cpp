#include "rugbayes/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "rugbayes/csv.hpp"
#include "rugbayes/errors.hpp"

namespace rugbayes {
namespace {

constexpr std::string_view kModule = "features";

// 1-based ranks with ties sharing the average of the positions they span.
std::vector<double> averaged_ranks(std::span<const double> values, bool descending) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double compute_effort(int tries, int conv_att, int pen_att, int drop_att) {
  const int total = tries + conv_att + pen_att + drop_att;
  if (total == 0) return 0.0;
  return static_cast<double>(tries) / static_cast<double>(total);
}

std::vector<double> compute_prevperf(const PrevSeasonTable& table, std::span<const std::string> teams) {
  const std::size_t n = table.size();
  if (n < 2) throw InputError(kModule, "previous-season table needs at least 2 teams to normalize rankings");
  std::vector<double> scored(n), received(n);
  for (std::size_t i = 0; i < n; ++i) {
    scored[i] = table.rows[i].scored;
    received[i] = table.rows[i].received;
  }
  const auto attack = averaged_ranks(scored, true);
  const auto defence = averaged_ranks(received, false);
  const double denom = static_cast<double>(n - 1);

  std::vector<double> out(teams.size(), 0.5);
  for (std::size_t t = 0; t < teams.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (table.rows[i].team != teams[t]) continue;
      const double a = (static_cast<double>(n) - attack[i]) / denom;
      const double d = (static_cast<double>(n) - defence[i]) / denom;
      out[t] = 0.5 * (a + d);
      break;
    }
  }
  return out;
}

std::vector<std::pair<int, int>> assign_week_indices(const Dataset& dataset) {
  const auto& matches = dataset.matches;
  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return matches[a].round < matches[b].round; });

  std::vector<int> played(dataset.nteams(), 0);
  std::vector<std::pair<int, int>> weeks(matches.size());
  for (const auto g : order) {
    const int h = dataset.team_index(matches[g].home_team);
    const int a = dataset.team_index(matches[g].away_team);
    weeks[g] = {++played[h], ++played[a]};
  }
  return weeks;
}

Standardized standardize_diffs(std::span<const double> raw) {
  if (raw.size() < 2) throw NumericError(kModule, "need at least 2 games to standardize score differences");
  const double n = static_cast<double>(raw.size());
  const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : raw) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw NumericError(kModule, "score differences have zero variance");
  Standardized out;
  out.scale = sd;
  out.y.reserve(raw.size());
  for (const double v : raw) out.y.push_back(v / sd);
  return out;
}

FeatureSet build_features(const Dataset& dataset, const PrevSeasonTable& prev, std::optional<double> scale) {
  FeatureSet fs;
  fs.nteams = static_cast<int>(dataset.nteams());
  fs.prevperf = compute_prevperf(prev, dataset.teams);

  std::vector<double> raw;
  raw.reserve(dataset.ngames());
  for (const auto& m : dataset.matches) raw.push_back(m.raw_diff());
  if (scale) {
    if (!(*scale > 0.0) || !std::isfinite(*scale)) throw InputError(kModule, "scale override must be positive");
    fs.scale = *scale;
  } else {
    fs.scale = standardize_diffs(raw).scale;
  }

  const auto weeks = assign_week_indices(dataset);
  fs.observations.reserve(dataset.ngames());
  for (std::size_t g = 0; g < dataset.ngames(); ++g) {
    const auto& m = dataset.matches[g];
    GameObservation obs;
    obs.home_idx = dataset.team_index(m.home_team);
    obs.away_idx = dataset.team_index(m.away_team);
    obs.home_week = weeks[g].first;
    obs.away_week = weeks[g].second;
    obs.raw_diff = raw[g];
    obs.y = raw[g] / fs.scale;
    obs.eff_home = compute_effort(m.home_tries, m.home_conv_att, m.home_pen_att, m.home_drop_att);
    obs.eff_away = compute_effort(m.away_tries, m.away_conv_att, m.away_pen_att, m.away_drop_att);
    obs.atten = m.attendance ? 1 : 0;
    obs.day = m.weekend ? 1 : 0;
    fs.nweeks = std::max({fs.nweeks, obs.home_week, obs.away_week});
    fs.observations.push_back(obs);
  }
  return fs;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw NumericError(kModule, "quantile of empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ColumnSummary summarize_column(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  ColumnSummary s;
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return s;
}

EffortSummary summarize_features(const Dataset& dataset, const FeatureSet& features) {
  if (dataset.ngames() == 0) throw InputError(kModule, "cannot summarize an empty dataset");
  const std::size_t n = dataset.ngames();
  auto column = [&](auto&& get) {
    std::vector<double> v;
    v.reserve(n);
    for (std::size_t g = 0; g < n; ++g) v.push_back(static_cast<double>(get(dataset.matches[g], features.observations[g])));
    return summarize_column(std::move(v));
  };
  EffortSummary s;
  s.home.score = column([](const MatchRecord& m, const GameObservation&) { return m.home_score; });
  s.home.tries = column([](const MatchRecord& m, const GameObservation&) { return m.home_tries; });
  s.home.conv_att = column([](const MatchRecord& m, const GameObservation&) { return m.home_conv_att; });
  s.home.pen_att = column([](const MatchRecord& m, const GameObservation&) { return m.home_pen_att; });
  s.home.drop_att = column([](const MatchRecord& m, const GameObservation&) { return m.home_drop_att; });
  s.home.effort = column([](const MatchRecord&, const GameObservation& o) { return o.eff_home; });
  s.away.score = column([](const MatchRecord& m, const GameObservation&) { return m.away_score; });
  s.away.tries = column([](const MatchRecord& m, const GameObservation&) { return m.away_tries; });
  s.away.conv_att = column([](const MatchRecord& m, const GameObservation&) { return m.away_conv_att; });
  s.away.pen_att = column([](const MatchRecord& m, const GameObservation&) { return m.away_pen_att; });
  s.away.drop_att = column([](const MatchRecord& m, const GameObservation&) { return m.away_drop_att; });
  s.away.effort = column([](const MatchRecord&, const GameObservation& o) { return o.eff_away; });
  return s;
}

void write_effort_summary(std::ostream& out, const EffortSummary& summary) {
  out << "side,column,min,q1,median,mean,q3,max\n";
  auto row = [&](std::string_view side, std::string_view name, const ColumnSummary& c) {
    out << side << ',' << name << ',' << csv::format_double(c.min) << ',' << csv::format_double(c.q1) << ','
        << csv::format_double(c.median) << ',' << csv::format_double(c.mean) << ',' << csv::format_double(c.q3) << ','
        << csv::format_double(c.max) << '\n';
  };
  for (const auto& [side, s] : {std::pair<std::string_view, const SideSummary&>{"home", summary.home}, {"away", summary.away}}) {
    row(side, "score", s.score);
    row(side, "tries", s.tries);
    row(side, "conv_att", s.conv_att);
    row(side, "pen_att", s.pen_att);
    row(side, "drop_att", s.drop_att);
    row(side, "effort", s.effort);
  }
}

void write_feature_dump(std::ostream& out, const Dataset& dataset, const FeatureSet& features) {
  out << "game,round,home_team,away_team,home_idx,away_idx,home_week,away_week,raw_diff,y,eff_home,eff_away,atten,day\n";
  for (std::size_t g = 0; g < features.observations.size(); ++g) {
    const auto& o = features.observations[g];
    const auto& m = dataset.matches[g];
    out << g + 1 << ',' << m.round << ',' << m.home_team << ',' << m.away_team << ',' << o.home_idx << ',' << o.away_idx
        << ',' << o.home_week << ',' << o.away_week << ',' << csv::format_double(o.raw_diff) << ','
        << csv::format_double(o.y) << ',' << csv::format_double(o.eff_home) << ',' << csv::format_double(o.eff_away)
        << ',' << o.atten << ',' << o.day << '\n';
  }
}

}  // namespace rugbayes
