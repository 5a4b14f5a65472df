#include "rugbayes/ppc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "rugbayes/csv.hpp"
#include "rugbayes/errors.hpp"

namespace rugbayes {
namespace {

constexpr std::string_view kModule = "ppc";

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw InputError(kModule, "variance needs at least 2 values");
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return ss / (n - 1.0);
}

void mean_sd(std::span<const double> v, double& mean, double& sd) {
  const double n = static_cast<double>(v.size());
  mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace

std::vector<double> ReplicationSet::game_column(std::size_t game) const {
  std::vector<double> out(replications);
  for (std::size_t r = 0; r < replications; ++r) out[r] = at(r, game);
  return out;
}

ReplicationSet replicate_scores(const DrawsMatrix& draws, const ScoreModel& model, std::uint64_t seed,
                                std::optional<std::size_t> n_replications) {
  const auto names = model.layout().names();
  std::vector<std::size_t> columns;
  columns.reserve(names.size());
  for (const auto& n : names) {
    const auto idx = draws.index_of(n);
    if (!idx) throw InputError(kModule, "draws are missing parameter '" + n + "' required by the model");
    columns.push_back(*idx);
  }

  const std::size_t stored = static_cast<std::size_t>(draws.chains()) * static_cast<std::size_t>(draws.draws());
  if (stored == 0) throw InputError(kModule, "no stored draws");
  const auto& obs = model.features().observations;
  ReplicationSet reps;
  reps.replications = n_replications.value_or(stored);
  reps.games = obs.size();
  reps.values.resize(reps.replications * reps.games);
  reps.observed.reserve(reps.games);
  for (const auto& g : obs) reps.observed.push_back(g.y);

  std::vector<double> constrained(names.size());
  const auto& layout = model.layout();
  for (std::size_t r = 0; r < reps.replications; ++r) {
    const std::size_t d = r % stored;
    const int chain = static_cast<int>(d / static_cast<std::size_t>(draws.draws()));
    const int iter = static_cast<int>(d % static_cast<std::size_t>(draws.draws()));
    for (std::size_t i = 0; i < columns.size(); ++i) constrained[i] = draws(chain, iter, columns[i]);
    const auto theta = model.unconstrain(constrained);
    const auto abilities = model.build_abilities(theta);
    const double nu = constrained[layout.log_nu()];
    const double sigma_y = constrained[layout.log_sigma_y()];

    Rng rng = make_stream(seed, r);
    std::student_t_distribution<double> noise(nu);
    double* row = reps.values.data() + r * reps.games;
    for (std::size_t g = 0; g < reps.games; ++g) row[g] = model.location(obs[g], abilities, theta) + sigma_y * noise(rng);
  }

  reps.rep_mean.resize(reps.replications);
  reps.rep_sd.resize(reps.replications);
  for (std::size_t r = 0; r < reps.replications; ++r) mean_sd(reps.replication(r), reps.rep_mean[r], reps.rep_sd[r]);

  reps.pvalues.resize(reps.games);
  reps.pred_mean.resize(reps.games);
  reps.pred_sd.resize(reps.games);
  for (std::size_t g = 0; g < reps.games; ++g) {
    const auto col = reps.game_column(g);
    reps.pvalues[g] = ppc_pvalue(col, reps.observed[g]);
    mean_sd(col, reps.pred_mean[g], reps.pred_sd[g]);
  }
  return reps;
}

double ppc_pvalue(std::span<const double> replications, double observed) {
  if (replications.empty()) throw InputError(kModule, "no replications");
  double below = 0.0;
  double ties = 0.0;
  for (const double v : replications) {
    if (v < observed) below += 1.0;
    else if (v == observed) ties += 1.0;
  }
  return (below + 0.5 * ties) / static_cast<double>(replications.size());
}

std::string_view to_string(Side side) { return side == Side::low ? "low" : "high"; }

std::vector<OutlierFlag> flag_outliers(const ReplicationSet& reps, double alpha) {
  if (!(alpha > 0.0)) throw InputError(kModule, "alpha must be positive");
  std::vector<OutlierFlag> flags;
  for (std::size_t g = 0; g < reps.pvalues.size(); ++g) {
    const double p = reps.pvalues[g];
    const double extremity = std::min(p, 1.0 - p);
    if (extremity < alpha || alpha >= 0.5) flags.push_back({g, p, p <= 0.5 ? Side::low : Side::high});
  }
  std::stable_sort(flags.begin(), flags.end(), [](const OutlierFlag& a, const OutlierFlag& b) {
    return std::min(a.pvalue, 1.0 - a.pvalue) < std::min(b.pvalue, 1.0 - b.pvalue);
  });
  return flags;
}

LuckDecomposition decompose_variance(double var_performance, double var_effort, int g, double p) {
  if (g < 1) throw InputError(kModule, "games per team must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError(kModule, "p must lie in [0, 1]");
  LuckDecomposition d;
  d.p = p;
  d.g = g;
  d.var_performance = var_performance;
  d.var_effort = var_effort;
  d.var_luck = p * (1.0 - p) / static_cast<double>(g);
  d.var_ability = var_performance - d.var_luck - var_effort;
  d.ability_negative = d.var_ability < 0.0;
  return d;
}

PerformanceConventions performance_conventions(std::span<const double> wins, int g) {
  if (wins.size() < 2) throw InputError(kModule, "need at least 2 teams");
  if (g < 1) throw InputError(kModule, "games per team must be at least 1");
  const double n = static_cast<double>(wins.size());
  std::vector<double> fractions(wins.begin(), wins.end());
  for (auto& f : fractions) f /= static_cast<double>(g);
  PerformanceConventions c;
  c.count_sample = sample_variance(wins);
  c.count_population = c.count_sample * (n - 1.0) / n;
  c.fraction_sample = sample_variance(fractions);
  c.fraction_population = c.fraction_sample * (n - 1.0) / n;
  return c;
}

LuckDecomposition luck_decomposition(std::span<const double> wins, std::span<const double> efforts, int g, double p) {
  if (wins.size() < 2) throw InputError(kModule, "luck decomposition needs at least 2 teams");
  const auto conv = performance_conventions(wins, g);
  return decompose_variance(conv.fraction_sample, sample_variance(efforts), g, p);
}

void write_ppc_csv(std::ostream& out, const ReplicationSet& reps, double alpha) {
  const auto flags = flag_outliers(reps, alpha);
  std::vector<std::string_view> flag(reps.games, "none");
  for (const auto& f : flags) flag[f.game] = to_string(f.side);
  out << "game,observed,pred_mean,pred_sd,pvalue,flag\n";
  for (std::size_t g = 0; g < reps.games; ++g) {
    out << g + 1 << ',' << csv::format_double(reps.observed[g]) << ',' << csv::format_double(reps.pred_mean[g]) << ','
        << csv::format_double(reps.pred_sd[g]) << ',' << csv::format_double(reps.pvalues[g]) << ',' << flag[g] << '\n';
  }
}

}  // namespace rugbayes
