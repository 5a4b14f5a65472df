#include "rugbayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "rugbayes/csv.hpp"
#include "rugbayes/errors.hpp"
#include "rugbayes/features.hpp"

namespace rugbayes {
namespace {

constexpr std::string_view kModule = "diagnostics";

ChainDraws split_halves(const ChainDraws& chains) {
  ChainDraws halves;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // Odd lengths drop the middle draw.
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return halves;
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

struct ChainMoments {
  std::vector<double> means;
  std::vector<double> vars;
  double w = 0.0;         // mean within-chain variance
  double b_over_n = 0.0;  // variance of chain means
  std::size_t n = 0;
};

std::optional<ChainMoments> moments(const ChainDraws& raw) {
  if (raw.empty()) return std::nullopt;
  const auto halves = split_halves(raw);
  std::size_t n = halves.front().size();
  for (const auto& h : halves) n = std::min(n, h.size());
  if (n < 4 || halves.size() < 2) return std::nullopt;

  ChainMoments m;
  m.n = n;
  for (const auto& h : halves) {
    const std::span<const double> s(h.data(), n);
    const double mu = mean_of(s);
    m.means.push_back(mu);
    m.vars.push_back(sample_variance(s, mu));
  }
  m.w = mean_of(m.vars);
  const double grand = mean_of(m.means);
  m.b_over_n = sample_variance(m.means, grand);
  // Treat relative variance below rounding noise as exactly zero.
  double scale = 0.0;
  for (const auto& h : halves) {
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(h[i]));
  }
  if (!(m.w > 1e-28 * scale * scale) || !std::isfinite(m.w)) return std::nullopt;
  return m;
}

// Biased (1/n) autocovariance of s at the given lag.
double autocovariance(std::span<const double> s, double mean, std::size_t lag) {
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < s.size(); ++i) acc += (s[i] - mean) * (s[i + lag] - mean);
  return acc / static_cast<double>(s.size());
}

}  // namespace

std::optional<double> split_rhat(const ChainDraws& chains) {
  const auto m = moments(chains);
  if (!m) return std::nullopt;
  const double n = static_cast<double>(m->n);
  const double var_plus = m->w * (n - 1.0) / n + m->b_over_n;
  return std::sqrt(var_plus / m->w);
}

std::optional<double> effective_sample_size(const ChainDraws& chains) {
  const auto m = moments(chains);
  if (!m) return std::nullopt;
  const auto halves = split_halves(chains);
  const std::size_t n = m->n;
  const std::size_t nchains = halves.size();
  const double nd = static_cast<double>(n);
  const double var_plus = m->w * (nd - 1.0) / nd + m->b_over_n;

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < nchains; ++c) acov += autocovariance({halves[c].data(), n}, m->means[c], lag);
    acov /= static_cast<double>(nchains);
    return 1.0 - (m->w - acov) / var_plus;
  };

  // Pairs (rho_{2k}, rho_{2k+1}) are summed while positive and forced to be
  // non-increasing.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n - 2; lag += 2) {
    double pair = (lag == 0 ? 1.0 : rho(lag)) + rho(lag + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  const double total = nd * static_cast<double>(nchains);
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

SummaryRow summarize_param(const std::string& name, const ChainDraws& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  if (all.empty()) throw InputError(kModule, "no draws for parameter '" + name + "'");
  SummaryRow row;
  row.param = name;
  row.rhat = split_rhat(chains);
  row.n_eff = effective_sample_size(chains);
  row.mean = mean_of(all);
  row.sd = all.size() > 1 ? std::sqrt(sample_variance(all, row.mean)) : 0.0;
  std::sort(all.begin(), all.end());
  row.q025 = quantile_sorted(all, 0.025);
  row.q500 = quantile_sorted(all, 0.5);
  row.q975 = quantile_sorted(all, 0.975);
  return row;
}

std::vector<SummaryRow> summarize(const DrawsMatrix& draws, bool include_latent) {
  if (draws.chains() == 0 || draws.draws() == 0) throw InputError(kModule, "empty draws");
  std::vector<SummaryRow> rows;
  for (const char* name : {"b_home", "b_prev", "b_atten", "b_effort", "b_day", "nu", "sigma_y"}) {
    if (const auto idx = draws.index_of(name)) rows.push_back(summarize_param(name, draws.param_chains(*idx)));
  }
  if (include_latent) {
    for (std::size_t p = 0; p < draws.nparams(); ++p) {
      const auto& name = draws.names()[p];
      if (name.rfind("sigma_a[", 0) == 0 || name.rfind("eta[", 0) == 0) rows.push_back(summarize_param(name, draws.param_chains(p)));
    }
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string("NA"); };
  out << "param,rhat,n_eff,mean,sd,q025,q500,q975\n";
  for (const auto& r : rows) {
    const bool quote = r.param.find(',') != std::string::npos;
    out << (quote ? "\"" + r.param + "\"" : r.param) << ',' << opt(r.rhat) << ',' << opt(r.n_eff) << ',' << csv::format_double(r.mean) << ','
        << csv::format_double(r.sd) << ',' << csv::format_double(r.q025) << ',' << csv::format_double(r.q500) << ','
        << csv::format_double(r.q975) << '\n';
  }
}

}  // namespace rugbayes
