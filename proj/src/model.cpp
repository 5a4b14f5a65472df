#include "rugbayes/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rugbayes/errors.hpp"
#include "rugbayes/special.hpp"

namespace rugbayes {
namespace {

constexpr std::string_view kModule = "model";
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double check_finite(double value, std::string_view what) {
  if (std::isnan(value) || value == std::numeric_limits<double>::infinity()) {
    throw NumericError(kModule, std::string(what) + " is not finite");
  }
  return value;
}

}  // namespace

Variant parse_variant(std::string_view text) {
  if (text == "I" || text == "1") return Variant::I;
  if (text == "II" || text == "2") return Variant::II;
  if (text == "III" || text == "3") return Variant::III;
  if (text == "IV" || text == "4") return Variant::IV;
  throw InputError(kModule, "unknown model variant '" + std::string(text) + "' (expected I, II, III or IV)");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::I: return "I";
    case Variant::II: return "II";
    case Variant::III: return "III";
    case Variant::IV: return "IV";
  }
  return "?";
}

PrevperfMode parse_prevperf_mode(std::string_view text) {
  if (text == "tries") return PrevperfMode::tries;
  if (text == "points") return PrevperfMode::points;
  throw InputError(kModule, "unknown prevperf mode '" + std::string(text) + "' (expected tries or points)");
}

std::string_view to_string(PrevperfMode m) { return m == PrevperfMode::tries ? "tries" : "points"; }

void ModelConfig::validate() const {
  const auto& p = priors;
  for (const double v : {p.nu_shape, p.nu_rate, p.beta_sd, p.sigma_y_sd, p.sigma_a_sd, p.eta_sd}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(kModule, "prior shapes, rates and scales must be positive");
  }
  if (!std::isfinite(p.beta_mean) || !std::isfinite(p.sigma_y_mean)) throw InputError(kModule, "prior means must be finite");
  if (variant == Variant::IV && prevperf_mode != PrevperfMode::points) {
    throw InputError(kModule, "model IV requires points-based previous-season rankings");
  }
  if (!(nu_min >= 0.0)) throw InputError(kModule, "nu_min must be nonnegative");
}

ParameterLayout::ParameterLayout(Variant variant, int nteams, int nweeks)
    : variant_(variant), nteams_(nteams), nweeks_(nweeks) {
  if (nteams < 1 || nweeks < 1) throw InputError(kModule, "parameter layout needs at least one team and one week");
  std::size_t next = 3;
  if (variant != Variant::I) b_atten_ = next++;
  if (variant == Variant::III || variant == Variant::IV) b_day_ = next++;
  log_nu_ = next;
  next += 2;
  sigma_a_ = next;
  next += static_cast<std::size_t>(nteams);
  eta_ = next;
  next += static_cast<std::size_t>(nteams) * static_cast<std::size_t>(nweeks);
  size_ = next;
}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> out(size_);
  out[b_home()] = "b_home";
  out[b_prev()] = "b_prev";
  out[b_effort()] = "b_effort";
  if (b_atten_) out[*b_atten_] = "b_atten";
  if (b_day_) out[*b_day_] = "b_day";
  out[log_nu()] = "nu";
  out[log_sigma_y()] = "sigma_y";
  for (int t = 0; t < nteams_; ++t) out[sigma_a(t)] = "sigma_a[" + std::to_string(t + 1) + "]";
  for (int w = 1; w <= nweeks_; ++w) {
    for (int t = 0; t < nteams_; ++t) out[eta(w, t)] = "eta[" + std::to_string(w) + "," + std::to_string(t + 1) + "]";
  }
  return out;
}

double normal_log_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

double gamma_log_density(double x, double shape, double rate) {
  return (shape - 1.0) * std::log(x) - rate * x + shape * std::log(rate) - special::log_gamma(shape);
}

double student_t_log_density(double y, double nu, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  return special::log_gamma_half_ratio(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) - std::log(sigma) -
         0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

ScoreModel::ScoreModel(FeatureSet features, ModelConfig config)
    : features_(std::move(features)), config_(config), layout_(config.variant, features_.nteams, std::max(features_.nweeks, 1)) {
  config_.validate();
  if (static_cast<int>(features_.prevperf.size()) != features_.nteams) {
    throw InputError(kModule, "prevperf has " + std::to_string(features_.prevperf.size()) + " entries for " +
                                  std::to_string(features_.nteams) + " teams");
  }
  for (const auto& g : features_.observations) {
    if (g.home_idx < 0 || g.home_idx >= features_.nteams || g.away_idx < 0 || g.away_idx >= features_.nteams) {
      throw InputError(kModule, "game references an unknown team index");
    }
    if (g.home_week < 1 || g.home_week > layout_.nweeks() || g.away_week < 1 || g.away_week > layout_.nweeks()) {
      throw InputError(kModule, "game week index outside 1..nweeks");
    }
  }
}

void ScoreModel::check_dim(std::span<const double> theta) const {
  if (theta.size() != layout_.size()) {
    throw InputError(kModule, "parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                                  std::to_string(layout_.size()));
  }
}

AbilityMatrix ScoreModel::build_abilities(std::span<const double> theta) const {
  check_dim(theta);
  const int nt = layout_.nteams();
  const int nw = layout_.nweeks();
  const double b_prev = theta[ParameterLayout::b_prev()];
  AbilityMatrix a(nw, nt);
  for (int t = 0; t < nt; ++t) a(1, t) = b_prev * features_.prevperf[t] + theta[layout_.eta(1, t)];
  for (int w = 2; w <= nw; ++w) {
    for (int t = 0; t < nt; ++t) a(w, t) = a(w - 1, t) + theta[layout_.sigma_a(t)] * theta[layout_.eta(w, t)];
  }
  return a;
}

double ScoreModel::location(const GameObservation& g, const AbilityMatrix& a, std::span<const double> theta) const {
  return a(g.home_week, g.home_idx) - a(g.away_week, g.away_idx) +
         theta[ParameterLayout::b_effort()] * (g.eff_home - g.eff_away) + theta[ParameterLayout::b_home()] +
         coef(theta, layout_.b_atten()) * g.atten + coef(theta, layout_.b_day()) * g.day;
}

double ScoreModel::log_prior(std::span<const double> theta) const {
  check_dim(theta);
  const auto& p = config_.priors;
  const double log_nu = theta[layout_.log_nu()];
  const double nu = std::exp(log_nu);
  if (!(nu >= config_.nu_min)) return -std::numeric_limits<double>::infinity();
  const double log_sigma_y = theta[layout_.log_sigma_y()];
  const double sigma_y = std::exp(log_sigma_y);

  double lp = 0.0;
  for (const auto idx : {std::optional<std::size_t>(ParameterLayout::b_home()), std::optional<std::size_t>(ParameterLayout::b_prev()),
                         std::optional<std::size_t>(ParameterLayout::b_effort()), layout_.b_atten(), layout_.b_day()}) {
    if (idx) lp += normal_log_density(theta[*idx], p.beta_mean, p.beta_sd);
  }
  lp += gamma_log_density(nu, p.nu_shape, p.nu_rate) + log_nu;
  lp += normal_log_density(sigma_y, p.sigma_y_mean, p.sigma_y_sd) + log_sigma_y;
  for (int t = 0; t < layout_.nteams(); ++t) lp += normal_log_density(theta[layout_.sigma_a(t)], 0.0, p.sigma_a_sd);
  const auto eta = theta.subspan(layout_.eta_offset());
  for (const double e : eta) lp += normal_log_density(e, 0.0, p.eta_sd);
  return check_finite(lp, "log prior");
}

double ScoreModel::log_likelihood(std::span<const double> theta) const {
  check_dim(theta);
  const double nu = std::exp(theta[layout_.log_nu()]);
  const double sigma_y = std::exp(theta[layout_.log_sigma_y()]);
  if (!(nu > 0.0) || !(sigma_y > 0.0)) throw NumericError(kModule, "nu and sigma_y must be positive");
  const auto a = build_abilities(theta);
  const double constant = special::log_gamma_half_ratio(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) - std::log(sigma_y);
  double ll = 0.0;
  for (const auto& g : features_.observations) {
    const double z = (g.y - location(g, a, theta)) / sigma_y;
    ll += constant - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
  }
  return check_finite(ll, "log likelihood");
}

double ScoreModel::log_posterior(std::span<const double> theta) const {
  const double prior = log_prior(theta);
  if (prior == -std::numeric_limits<double>::infinity() || !config_.likelihood) return prior;
  return prior + log_likelihood(theta);
}

double ScoreModel::log_posterior_gradient(std::span<const double> theta, std::span<double> grad) const {
  check_dim(theta);
  if (grad.size() != theta.size()) throw InputError(kModule, "gradient buffer has the wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);

  const double lp_prior = log_prior(theta);
  if (lp_prior == -std::numeric_limits<double>::infinity()) return lp_prior;

  const auto& p = config_.priors;
  const int nt = layout_.nteams();
  const int nw = layout_.nweeks();
  const double nu = std::exp(theta[layout_.log_nu()]);
  const double sigma_y = std::exp(theta[layout_.log_sigma_y()]);

  // Prior terms. Log-transform Jacobians add +1 to the log_nu and
  // log_sigma_y derivatives.
  const double beta_prec = 1.0 / (p.beta_sd * p.beta_sd);
  for (const auto idx : {std::optional<std::size_t>(ParameterLayout::b_home()), std::optional<std::size_t>(ParameterLayout::b_prev()),
                         std::optional<std::size_t>(ParameterLayout::b_effort()), layout_.b_atten(), layout_.b_day()}) {
    if (idx) grad[*idx] = -(theta[*idx] - p.beta_mean) * beta_prec;
  }
  grad[layout_.log_nu()] = p.nu_shape - p.nu_rate * nu;
  grad[layout_.log_sigma_y()] = -(sigma_y - p.sigma_y_mean) / (p.sigma_y_sd * p.sigma_y_sd) * sigma_y + 1.0;
  const double sa_prec = 1.0 / (p.sigma_a_sd * p.sigma_a_sd);
  for (int t = 0; t < nt; ++t) grad[layout_.sigma_a(t)] = -theta[layout_.sigma_a(t)] * sa_prec;
  const double eta_prec = 1.0 / (p.eta_sd * p.eta_sd);
  for (std::size_t i = layout_.eta_offset(); i < layout_.size(); ++i) grad[i] = -theta[i] * eta_prec;

  if (!config_.likelihood) return lp_prior;

  // Likelihood: accumulate d/d(location) into the ability cells, then
  // back-propagate through the random-walk recursion.
  const auto a = build_abilities(theta);
  AbilityMatrix grad_a(nw, nt);
  const double constant = special::log_gamma_half_ratio(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) - std::log(sigma_y);
  const double dconst_dnu = 0.5 * special::digamma_half_diff(0.5 * nu) - 0.5 / nu;
  const auto i_atten = layout_.b_atten();
  const auto i_day = layout_.b_day();

  double ll = 0.0;
  double d_log_nu = 0.0;
  double d_log_sigma = 0.0;
  for (const auto& g : features_.observations) {
    const double resid = g.y - location(g, a, theta);
    const double z = resid / sigma_y;
    const double z2 = z * z;
    const double denom = nu + z2;
    ll += constant - 0.5 * (nu + 1.0) * std::log1p(z2 / nu);

    const double d_mu = (nu + 1.0) * z / (sigma_y * denom);
    grad_a(g.home_week, g.home_idx) += d_mu;
    grad_a(g.away_week, g.away_idx) -= d_mu;
    grad[ParameterLayout::b_home()] += d_mu;
    grad[ParameterLayout::b_effort()] += d_mu * (g.eff_home - g.eff_away);
    if (i_atten) grad[*i_atten] += d_mu * g.atten;
    if (i_day) grad[*i_day] += d_mu * g.day;

    d_log_sigma += -1.0 + (nu + 1.0) * z2 / denom;
    d_log_nu += dconst_dnu - 0.5 * std::log1p(z2 / nu) + 0.5 * (nu + 1.0) * z2 / (nu * denom);
  }
  grad[layout_.log_nu()] += d_log_nu * nu;
  grad[layout_.log_sigma_y()] += d_log_sigma;

  // a[w] depends on a[w-1], so the adjoint of a[w] is the suffix sum of the
  // direct contributions over weeks >= w.
  for (int t = 0; t < nt; ++t) {
    double suffix = 0.0;
    double d_sigma_a = 0.0;
    for (int w = nw; w >= 2; --w) {
      suffix += grad_a(w, t);
      d_sigma_a += suffix * theta[layout_.eta(w, t)];
      grad[layout_.eta(w, t)] += suffix * theta[layout_.sigma_a(t)];
    }
    suffix += grad_a(1, t);
    grad[layout_.eta(1, t)] += suffix;
    grad[ParameterLayout::b_prev()] += suffix * features_.prevperf[t];
    grad[layout_.sigma_a(t)] += d_sigma_a;
  }

  const double lp = check_finite(lp_prior + ll, "log posterior");
  for (const double gi : grad) {
    if (!std::isfinite(gi)) throw NumericError(kModule, "gradient has a non-finite component");
  }
  return lp;
}

std::vector<double> ScoreModel::constrain(std::span<const double> theta) const {
  check_dim(theta);
  std::vector<double> out(theta.begin(), theta.end());
  out[layout_.log_nu()] = std::exp(theta[layout_.log_nu()]);
  out[layout_.log_sigma_y()] = std::exp(theta[layout_.log_sigma_y()]);
  return out;
}

std::vector<double> ScoreModel::unconstrain(std::span<const double> constrained) const {
  check_dim(constrained);
  std::vector<double> out(constrained.begin(), constrained.end());
  const double nu = constrained[layout_.log_nu()];
  const double sigma_y = constrained[layout_.log_sigma_y()];
  if (!(nu > 0.0) || !(sigma_y > 0.0)) throw InputError(kModule, "nu and sigma_y must be positive");
  out[layout_.log_nu()] = std::log(nu);
  out[layout_.log_sigma_y()] = std::log(sigma_y);
  return out;
}

}  // namespace rugbayes
