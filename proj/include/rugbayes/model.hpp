#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rugbayes/features.hpp"

namespace rugbayes {

// Model I: baseline home advantage. II adds attendance, III adds the
// weekend flag, IV is III with points-based previous-season rankings.
enum class Variant { I = 1, II = 2, III = 3, IV = 4 };
enum class PrevperfMode { tries, points };

Variant parse_variant(std::string_view text);
std::string_view to_string(Variant v);
PrevperfMode parse_prevperf_mode(std::string_view text);
std::string_view to_string(PrevperfMode m);

struct Priors {
  double nu_shape = 9.0;
  double nu_rate = 0.5;
  double beta_mean = 0.5;
  double beta_sd = 1.0;
  double sigma_y_mean = 0.5;
  double sigma_y_sd = 1.0;
  double sigma_a_sd = 0.1;
  double eta_sd = 0.5;
};

struct ModelConfig {
  Variant variant = Variant::II;
  Priors priors;
  PrevperfMode prevperf_mode = PrevperfMode::tries;
  // Degrees of freedom below this are outside the support.
  double nu_min = 0.1;
  // When false the posterior is the prior (prior-predictive runs).
  bool likelihood = true;

  bool has_atten() const { return variant != Variant::I; }
  bool has_day() const { return variant == Variant::III || variant == Variant::IV; }

  // Throws InputError on non-positive scales or an inconsistent
  // variant/prevperf_mode pair.
  void validate() const;
};

// Maps named parameter blocks to slices of the unconstrained vector:
//   b_home, b_prev, b_effort, [b_atten], [b_day], log_nu, log_sigma_y,
//   sigma_a[nteams], eta[nweeks x nteams] (row-major by week).
class ParameterLayout {
 public:
  ParameterLayout(Variant variant, int nteams, int nweeks);

  std::size_t size() const { return size_; }
  int nteams() const { return nteams_; }
  int nweeks() const { return nweeks_; }
  Variant variant() const { return variant_; }

  static constexpr std::size_t b_home() { return 0; }
  static constexpr std::size_t b_prev() { return 1; }
  static constexpr std::size_t b_effort() { return 2; }
  std::optional<std::size_t> b_atten() const { return b_atten_; }
  std::optional<std::size_t> b_day() const { return b_day_; }
  std::size_t log_nu() const { return log_nu_; }
  std::size_t log_sigma_y() const { return log_nu_ + 1; }
  std::size_t sigma_a(int team) const { return sigma_a_ + static_cast<std::size_t>(team); }
  // week is 1-based, team 0-based.
  std::size_t eta(int week, int team) const {
    return eta_ + static_cast<std::size_t>(week - 1) * static_cast<std::size_t>(nteams_) + static_cast<std::size_t>(team);
  }
  std::size_t eta_offset() const { return eta_; }
  std::size_t sigma_a_offset() const { return sigma_a_; }

  // Names on the constrained scale (nu, sigma_y instead of their logs),
  // 1-based indices in brackets: sigma_a[t], eta[w,t].
  std::vector<std::string> names() const;

  // Number of leading coordinates that are the top-level (non-latent) ones.
  std::size_t n_top_level() const { return log_nu_ + 2; }

 private:
  Variant variant_;
  int nteams_;
  int nweeks_;
  std::optional<std::size_t> b_atten_;
  std::optional<std::size_t> b_day_;
  std::size_t log_nu_ = 0;
  std::size_t sigma_a_ = 0;
  std::size_t eta_ = 0;
  std::size_t size_ = 0;
};

// Latent ability a[w, t], w 1-based.
class AbilityMatrix {
 public:
  AbilityMatrix(int nweeks, int nteams) : nweeks_(nweeks), nteams_(nteams), values_(static_cast<std::size_t>(nweeks) * nteams, 0.0) {}

  double& operator()(int week, int team) { return values_[index(week, team)]; }
  double operator()(int week, int team) const { return values_[index(week, team)]; }
  int nweeks() const { return nweeks_; }
  int nteams() const { return nteams_; }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t index(int week, int team) const {
    return static_cast<std::size_t>(week - 1) * static_cast<std::size_t>(nteams_) + static_cast<std::size_t>(team);
  }
  int nweeks_;
  int nteams_;
  std::vector<double> values_;
};

// Location-scale Student-t log density.
double student_t_log_density(double y, double nu, double mu, double sigma);
double normal_log_density(double x, double mean, double sd);
// Gamma(shape, rate) log density.
double gamma_log_density(double x, double shape, double rate);

// Log posterior of the score-difference model on the unconstrained scale.
// The object keeps copies of the features and configuration and is safe to
// evaluate concurrently.
class ScoreModel {
 public:
  ScoreModel(FeatureSet features, ModelConfig config);

  const ParameterLayout& layout() const { return layout_; }
  const FeatureSet& features() const { return features_; }
  const ModelConfig& config() const { return config_; }
  std::size_t dim() const { return layout_.size(); }

  AbilityMatrix build_abilities(std::span<const double> theta) const;
  double location(const GameObservation& game, const AbilityMatrix& abilities, std::span<const double> theta) const;

  // Returns -infinity when nu is below nu_min. Throws NumericError when the
  // result is NaN or +infinity.
  double log_prior(std::span<const double> theta) const;
  double log_likelihood(std::span<const double> theta) const;
  double log_posterior(std::span<const double> theta) const;

  // Writes the gradient of log_posterior into grad and returns the value.
  // Outside the support the value is -infinity and grad is zeroed.
  double log_posterior_gradient(std::span<const double> theta, std::span<double> grad) const;

  // Unconstrained <-> constrained (exp on log_nu and log_sigma_y).
  std::vector<double> constrain(std::span<const double> theta) const;
  std::vector<double> unconstrain(std::span<const double> constrained) const;

 private:
  double coef(std::span<const double> theta, std::optional<std::size_t> idx) const { return idx ? theta[*idx] : 0.0; }
  void check_dim(std::span<const double> theta) const;

  FeatureSet features_;
  ModelConfig config_;
  ParameterLayout layout_;
};

}  // namespace rugbayes
