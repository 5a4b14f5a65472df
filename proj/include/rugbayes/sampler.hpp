#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rugbayes/model.hpp"

namespace rugbayes {

// Returns log density at q and writes its gradient; -infinity outside the
// support.
using LogDensityFn = std::function<double(std::span<const double> q, std::span<double> grad)>;

using Rng = std::mt19937_64;

struct SamplerConfig {
  int chains = 4;
  int iters = 2500;
  int warmup = 1500;
  std::uint64_t seed = 0;
  double target_accept = 0.8;
  int max_leapfrog_steps = 1024;
  double init_radius = 2.0;
  // Upper end of the jittered trajectory length, in whitened units.
  double integration_time = 2.0 * std::numbers::pi;
  double divergence_threshold = 1000.0;
  // Worker threads for chains; 0 means one per chain. Does not affect output.
  int threads = 0;

  void validate() const;
};

// Independent generator for chain `stream`, derived by hashing (seed, stream).
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

struct PhasePoint {
  std::vector<double> position;
  std::vector<double> momentum;
  std::vector<double> gradient;
  double log_density = 0.0;
};

// Evaluates log density and gradient at point.position.
void refresh(PhasePoint& point, const LogDensityFn& target);

double kinetic_energy(std::span<const double> momentum, std::span<const double> inv_mass);
double hamiltonian(const PhasePoint& point, std::span<const double> inv_mass);

struct LeapfrogResult {
  // Hamiltonian before the first step and after every completed step.
  std::vector<double> energy;
  bool diverged = false;
};

// Integrates n_steps in place. Stops early and flags a divergence when the
// Hamiltonian becomes non-finite or exceeds its start by the threshold.
LeapfrogResult leapfrog(PhasePoint& point, double step_size, int n_steps, std::span<const double> inv_mass,
                        const LogDensityFn& target, double divergence_threshold = 1000.0);

struct AdaptedParams {
  double step_size = 1.0;
  std::vector<double> inv_mass;  // diagonal inverse metric (variance scale)
  int max_steps = 1;             // jitter upper bound for the step count
};

struct TransitionResult {
  double accept_prob = 0.0;
  bool accepted = false;
  bool diverged = false;
  int n_steps = 0;
};

// One HMC transition with momentum refresh, a step count drawn uniformly from
// [1, params.max_steps] and a Metropolis correction.
TransitionResult hmc_transition(PhasePoint& state, Rng& rng, const AdaptedParams& params, const LogDensityFn& target,
                                double divergence_threshold = 1000.0);

struct WarmupResult {
  AdaptedParams params;
  PhasePoint state;
  int divergences = 0;
};

// Runs config.warmup transitions from `init`, adapting the step size by dual
// averaging and the diagonal metric from windowed variance estimates (the
// last window covers the second half of warmup). Throws NumericError when
// every warmup transition diverges.
WarmupResult adapt_warmup(PhasePoint init, Rng& rng, const SamplerConfig& config, const LogDensityFn& target);

struct ChainStats {
  double step_size = 0.0;
  std::vector<double> inv_mass;
  double mean_accept = 0.0;
  int divergences = 0;
  int warmup_divergences = 0;
  double mean_steps = 0.0;
};

struct ChainResult {
  std::vector<double> draws;  // (iters - warmup) x dim, unconstrained
  ChainStats stats;
};

// Runs one chain from a uniform(-init_radius, init_radius) start.
ChainResult run_chain(const LogDensityFn& target, std::size_t dim, const SamplerConfig& config, int chain);

// Runs config.chains chains, possibly in parallel. The output depends only on
// (target, dim, config) minus config.threads.
std::vector<ChainResult> run_chains(const LogDensityFn& target, std::size_t dim, const SamplerConfig& config);

// chains x draws x parameters store.
class DrawsMatrix {
 public:
  DrawsMatrix() = default;
  DrawsMatrix(int chains, int draws, std::vector<std::string> names);

  int chains() const { return chains_; }
  int draws() const { return draws_; }
  std::size_t nparams() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  double& operator()(int chain, int draw, std::size_t param) { return values_[offset(chain, draw) + param]; }
  double operator()(int chain, int draw, std::size_t param) const { return values_[offset(chain, draw) + param]; }
  std::span<const double> draw(int chain, int draw) const { return {values_.data() + offset(chain, draw), names_.size()}; }
  std::span<double> draw(int chain, int draw) { return {values_.data() + offset(chain, draw), names_.size()}; }

  // Per-chain draws of one parameter.
  std::vector<std::vector<double>> param_chains(std::size_t param) const;

  std::vector<ChainStats>& stats() { return stats_; }
  const std::vector<ChainStats>& stats() const { return stats_; }
  int total_divergences() const;

  bool same_values(const DrawsMatrix& other) const { return names_ == other.names_ && chains_ == other.chains_ && draws_ == other.draws_ && values_ == other.values_; }

 private:
  std::size_t offset(int chain, int draw) const {
    return (static_cast<std::size_t>(chain) * static_cast<std::size_t>(draws_) + static_cast<std::size_t>(draw)) * names_.size();
  }
  int chains_ = 0;
  int draws_ = 0;
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<ChainStats> stats_;
};

// Fits the score model. Draws are stored on the constrained scale with the
// names of ParameterLayout::names().
DrawsMatrix run_sampler(const ScoreModel& model, const SamplerConfig& config);

LogDensityFn model_density(const ScoreModel& model);

// Draws CSV: chain,iter,<parameters...>,a[w,t]... with 1-based chain/iter.
// Ability columns are derived from each draw when a model is given.
void write_draws_csv(std::ostream& out, const DrawsMatrix& draws, const ScoreModel* model);
// Reads a draws CSV; derived a[w,t] columns are skipped.
DrawsMatrix read_draws_csv(std::istream& in, std::string_view source = "<stream>");

}  // namespace rugbayes
