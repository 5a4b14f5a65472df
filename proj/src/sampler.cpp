#include "rugbayes/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "rugbayes/csv.hpp"
#include "rugbayes/errors.hpp"

namespace rugbayes {
namespace {

constexpr std::string_view kModule = "sampler";

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Nesterov dual averaging of log step size toward a target acceptance rate.
class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double target) : target_(target) {}

  void restart(double step_size) {
    mu_ = std::log(10.0 * step_size);
    x_bar_ = 0.0;
    h_bar_ = 0.0;
    counter_ = 0;
  }

  double update(double accept_prob) {
    ++counter_;
    const double n = static_cast<double>(counter_);
    const double w = 1.0 / (n + kT0);
    h_bar_ = (1.0 - w) * h_bar_ + w * (target_ - accept_prob);
    const double x = mu_ - std::sqrt(n) / kGamma * h_bar_;
    const double x_w = std::pow(n, -kKappa);
    x_bar_ = x_w * x + (1.0 - x_w) * x_bar_;
    return std::exp(x);
  }

  double final_step_size() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double target_;
  double mu_ = 0.0;
  double x_bar_ = 0.0;
  double h_bar_ = 0.0;
  long counter_ = 0;
};

class RunningVariance {
 public:
  explicit RunningVariance(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  void add(std::span<const double> x) {
    ++n_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d / static_cast<double>(n_);
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }

  // Sample variance shrunk toward 1e-3, as in Stan's diagonal adaptation.
  std::vector<double> regularized() const {
    const double n = static_cast<double>(n_);
    std::vector<double> out(mean_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double var = n > 1 ? m2_[i] / (n - 1.0) : 1.0;
      out[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
    }
    return out;
  }

  long count() const { return n_; }

 private:
  long n_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

int steps_for(double step_size, const SamplerConfig& config) {
  const double n = std::ceil(config.integration_time / step_size);
  if (!std::isfinite(n) || n > config.max_leapfrog_steps) return config.max_leapfrog_steps;
  return std::max(1, static_cast<int>(n));
}

void draw_momentum(std::vector<double>& momentum, std::span<const double> inv_mass, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < momentum.size(); ++i) momentum[i] = normal(rng) / std::sqrt(inv_mass[i]);
}

// Doubles or halves the step size until a single leapfrog step crosses an
// acceptance probability of 0.8.
double initial_step_size(const PhasePoint& start, std::span<const double> inv_mass, double step_size, Rng& rng,
                         const LogDensityFn& target, double threshold) {
  PhasePoint probe = start;
  draw_momentum(probe.momentum, inv_mass, rng);
  const PhasePoint origin = probe;
  const double h0 = hamiltonian(origin, inv_mass);

  auto accept_at = [&](double eps) {
    probe = origin;
    const auto res = leapfrog(probe, eps, 1, inv_mass, target, threshold);
    if (res.diverged) return 0.0;
    const double dh = h0 - res.energy.back();
    return dh >= 0.0 ? 1.0 : std::exp(dh);
  };

  double accept = accept_at(step_size);
  const int direction = accept > 0.8 ? 1 : -1;
  for (int i = 0; i < 60; ++i) {
    const double next = direction > 0 ? 2.0 * step_size : 0.5 * step_size;
    accept = accept_at(next);
    if (direction > 0 && !(accept > 0.8)) break;
    step_size = next;
    if (direction < 0 && accept > 0.8) break;
  }
  return step_size;
}

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw InputError(kModule, "chains must be at least 1");
  if (!(warmup > 0 && warmup < iters)) throw InputError(kModule, "need 0 < warmup < iters");
  if (warmup < 100) throw InputError(kModule, "warmup must be at least 100 iterations for adaptation");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw InputError(kModule, "target_accept must lie in (0, 1)");
  if (max_leapfrog_steps < 1) throw InputError(kModule, "max_leapfrog_steps must be at least 1");
  if (!(init_radius > 0.0)) throw InputError(kModule, "init_radius must be positive");
  if (!(integration_time > 0.0)) throw InputError(kModule, "integration_time must be positive");
  if (threads < 0) throw InputError(kModule, "threads must be nonnegative");
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

void refresh(PhasePoint& point, const LogDensityFn& target) {
  point.gradient.resize(point.position.size());
  point.log_density = target(point.position, point.gradient);
}

double kinetic_energy(std::span<const double> momentum, std::span<const double> inv_mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < momentum.size(); ++i) k += momentum[i] * momentum[i] * inv_mass[i];
  return 0.5 * k;
}

double hamiltonian(const PhasePoint& point, std::span<const double> inv_mass) {
  return -point.log_density + kinetic_energy(point.momentum, inv_mass);
}

LeapfrogResult leapfrog(PhasePoint& point, double step_size, int n_steps, std::span<const double> inv_mass,
                        const LogDensityFn& target, double divergence_threshold) {
  if (!(step_size > 0.0)) throw InputError(kModule, "step size must be positive");
  LeapfrogResult result;
  result.energy.reserve(static_cast<std::size_t>(n_steps) + 1);
  const double h0 = hamiltonian(point, inv_mass);
  result.energy.push_back(h0);
  const std::size_t dim = point.position.size();
  for (int s = 0; s < n_steps; ++s) {
    for (std::size_t i = 0; i < dim; ++i) point.momentum[i] += 0.5 * step_size * point.gradient[i];
    for (std::size_t i = 0; i < dim; ++i) point.position[i] += step_size * inv_mass[i] * point.momentum[i];
    try {
      refresh(point, target);
    } catch (const NumericError&) {
      point.log_density = -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(point.log_density)) {
      result.energy.push_back(std::numeric_limits<double>::infinity());
      result.diverged = true;
      return result;
    }
    for (std::size_t i = 0; i < dim; ++i) point.momentum[i] += 0.5 * step_size * point.gradient[i];
    const double h = hamiltonian(point, inv_mass);
    result.energy.push_back(h);
    if (!std::isfinite(h) || h - h0 > divergence_threshold) {
      result.diverged = true;
      return result;
    }
  }
  return result;
}

TransitionResult hmc_transition(PhasePoint& state, Rng& rng, const AdaptedParams& params, const LogDensityFn& target,
                                double divergence_threshold) {
  TransitionResult out;
  PhasePoint proposal = state;
  proposal.momentum.resize(state.position.size());
  draw_momentum(proposal.momentum, params.inv_mass, rng);
  std::uniform_int_distribution<int> steps(1, std::max(1, params.max_steps));
  out.n_steps = steps(rng);
  const double h0 = hamiltonian(proposal, params.inv_mass);
  const auto traj = leapfrog(proposal, params.step_size, out.n_steps, params.inv_mass, target, divergence_threshold);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  if (traj.diverged) {
    out.diverged = true;
    out.accept_prob = 0.0;
    return out;
  }
  const double dh = h0 - traj.energy.back();
  out.accept_prob = dh >= 0.0 ? 1.0 : std::exp(dh);
  if (dh >= 0.0 || u < out.accept_prob) {
    out.accepted = true;
    state.position = std::move(proposal.position);
    state.gradient = std::move(proposal.gradient);
    state.log_density = proposal.log_density;
  }
  return out;
}

WarmupResult adapt_warmup(PhasePoint init, Rng& rng, const SamplerConfig& config, const LogDensityFn& target) {
  const std::size_t dim = init.position.size();
  const int n = config.warmup;
  // Windows: [0, b1) step size only, [b1, b2) first metric estimate,
  // [b2, b3) final metric estimate, [b3, n) step size only.
  const int b1 = std::max(1, static_cast<int>(0.15 * n));
  const int b2 = std::max(b1 + 1, n / 2);
  const int b3 = std::max(b2 + 1, static_cast<int>(0.9 * n));

  WarmupResult out;
  out.state = std::move(init);
  out.state.momentum.assign(dim, 0.0);
  auto& params = out.params;
  params.inv_mass.assign(dim, 1.0);
  params.step_size = initial_step_size(out.state, params.inv_mass, 1.0, rng, target, config.divergence_threshold);
  params.max_steps = steps_for(params.step_size, config);

  StepSizeAdapter adapter(config.target_accept);
  adapter.restart(params.step_size);
  RunningVariance window(dim);

  for (int it = 0; it < n; ++it) {
    const auto t = hmc_transition(out.state, rng, params, target, config.divergence_threshold);
    if (t.diverged) ++out.divergences;
    params.step_size = adapter.update(t.accept_prob);
    params.max_steps = steps_for(params.step_size, config);

    if (it >= b1 && it < b3) window.add(out.state.position);
    if (it + 1 == b2 || it + 1 == b3) {
      params.inv_mass = window.regularized();
      window = RunningVariance(dim);
      params.step_size = initial_step_size(out.state, params.inv_mass, params.step_size, rng, target, config.divergence_threshold);
      adapter.restart(params.step_size);
      params.max_steps = steps_for(params.step_size, config);
    }
  }
  if (out.divergences == n) throw NumericError(kModule, "every warmup transition diverged");
  params.step_size = adapter.final_step_size();
  params.max_steps = steps_for(params.step_size, config);
  return out;
}

ChainResult run_chain(const LogDensityFn& target, std::size_t dim, const SamplerConfig& config, int chain) {
  Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(chain));
  std::uniform_real_distribution<double> init(-config.init_radius, config.init_radius);

  PhasePoint start;
  start.position.resize(dim);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    for (auto& x : start.position) x = init(rng);
    try {
      refresh(start, target);
      ok = std::isfinite(start.log_density);
      for (const double g : start.gradient) ok = ok && std::isfinite(g);
    } catch (const NumericError&) {
      ok = false;
    }
  }
  if (!ok) throw NumericError(kModule, "no finite initial point after 100 attempts");

  auto warm = adapt_warmup(std::move(start), rng, config, target);
  ChainResult result;
  const int keep = config.iters - config.warmup;
  result.draws.reserve(static_cast<std::size_t>(keep) * dim);
  result.stats.warmup_divergences = warm.divergences;
  result.stats.step_size = warm.params.step_size;
  result.stats.inv_mass = warm.params.inv_mass;

  double accept_sum = 0.0;
  double steps_sum = 0.0;
  for (int it = 0; it < keep; ++it) {
    const auto t = hmc_transition(warm.state, rng, warm.params, target, config.divergence_threshold);
    accept_sum += t.accept_prob;
    steps_sum += t.n_steps;
    if (t.diverged) ++result.stats.divergences;
    result.draws.insert(result.draws.end(), warm.state.position.begin(), warm.state.position.end());
  }
  result.stats.mean_accept = accept_sum / keep;
  result.stats.mean_steps = steps_sum / keep;
  return result;
}

std::vector<ChainResult> run_chains(const LogDensityFn& target, std::size_t dim, const SamplerConfig& config) {
  config.validate();
  const int nchains = config.chains;
  std::vector<ChainResult> results(static_cast<std::size_t>(nchains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nchains));

  auto work = [&](int c) {
    try {
      results[static_cast<std::size_t>(c)] = run_chain(target, dim, config, c);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };

  const int nthreads = std::min(nchains, config.threads == 0 ? nchains : config.threads);
  if (nthreads <= 1) {
    for (int c = 0; c < nchains; ++c) work(c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) {
      pool.emplace_back([&] {
        for (int c = next++; c < nchains; c = next++) work(c);
      });
    }
  }

  for (int c = 0; c < nchains; ++c) {
    if (!errors[static_cast<std::size_t>(c)]) continue;
    try {
      std::rethrow_exception(errors[static_cast<std::size_t>(c)]);
    } catch (const InputError& e) {
      throw InputError(kModule, "chain " + std::to_string(c + 1) + ": " + e.what());
    } catch (const std::exception& e) {
      throw NumericError(kModule, "chain " + std::to_string(c + 1) + ": " + e.what());
    }
  }
  return results;
}

DrawsMatrix::DrawsMatrix(int chains, int draws, std::vector<std::string> names)
    : chains_(chains), draws_(draws), names_(std::move(names)),
      values_(static_cast<std::size_t>(chains) * static_cast<std::size_t>(draws) * names_.size(), 0.0),
      stats_(static_cast<std::size_t>(chains)) {}

std::optional<std::size_t> DrawsMatrix::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<std::vector<double>> DrawsMatrix::param_chains(std::size_t param) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(chains_));
  for (int c = 0; c < chains_; ++c) {
    auto& v = out[static_cast<std::size_t>(c)];
    v.reserve(static_cast<std::size_t>(draws_));
    for (int i = 0; i < draws_; ++i) v.push_back((*this)(c, i, param));
  }
  return out;
}

int DrawsMatrix::total_divergences() const {
  int n = 0;
  for (const auto& s : stats_) n += s.divergences;
  return n;
}

LogDensityFn model_density(const ScoreModel& model) {
  return [&model](std::span<const double> q, std::span<double> grad) { return model.log_posterior_gradient(q, grad); };
}

DrawsMatrix run_sampler(const ScoreModel& model, const SamplerConfig& config) {
  const auto results = run_chains(model_density(model), model.dim(), config);
  const int keep = config.iters - config.warmup;
  DrawsMatrix draws(config.chains, keep, model.layout().names());
  const std::size_t dim = model.dim();
  for (int c = 0; c < config.chains; ++c) {
    const auto& r = results[static_cast<std::size_t>(c)];
    for (int i = 0; i < keep; ++i) {
      const std::span<const double> theta(r.draws.data() + static_cast<std::size_t>(i) * dim, dim);
      const auto constrained = model.constrain(theta);
      std::copy(constrained.begin(), constrained.end(), draws.draw(c, i).begin());
    }
    draws.stats()[static_cast<std::size_t>(c)] = r.stats;
  }
  return draws;
}

void write_draws_csv(std::ostream& out, const DrawsMatrix& draws, const ScoreModel* model) {
  auto quoted = [](const std::string& name) { return name.find(',') == std::string::npos ? name : '"' + name + '"'; };
  out << "chain,iter";
  for (const auto& n : draws.names()) out << ',' << quoted(n);
  if (model) {
    for (int w = 1; w <= model->layout().nweeks(); ++w) {
      for (int t = 1; t <= model->layout().nteams(); ++t) out << ",\"a[" << w << ',' << t << "]\"";
    }
  }
  out << '\n';
  for (int c = 0; c < draws.chains(); ++c) {
    for (int i = 0; i < draws.draws(); ++i) {
      out << c + 1 << ',' << i + 1;
      const auto row = draws.draw(c, i);
      for (const double v : row) out << ',' << csv::format_double(v);
      if (model) {
        const auto abilities = model->build_abilities(model->unconstrain(row));
        for (const double v : abilities.values()) out << ',' << csv::format_double(v);
      }
      out << '\n';
    }
  }
}

namespace {

// Names such as "eta[1,2]" contain a comma, so tokens are rejoined until
// brackets balance and surrounding quotes are dropped.
std::vector<std::string> split_header(std::string_view line) {
  std::vector<std::string> raw = csv::split_line(line);
  std::vector<std::string> out;
  std::string pending;
  int depth = 0;
  for (auto& cell : raw) {
    if (!pending.empty() || depth > 0) pending += ',';
    pending += cell;
    for (const char ch : cell) {
      if (ch == '[') ++depth;
      if (ch == ']') --depth;
    }
    if (depth == 0) {
      if (pending.size() >= 2 && pending.front() == '"' && pending.back() == '"') pending = pending.substr(1, pending.size() - 2);
      out.push_back(std::move(pending));
      pending.clear();
    }
  }
  if (depth != 0) throw InputError(kModule, "unbalanced brackets in draws header");
  return out;
}

}  // namespace

DrawsMatrix read_draws_csv(std::istream& in, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw InputError(kModule, std::string(source) + ": empty draws file");
  const auto header = split_header(csv::trim(line));
  if (header.size() < 3 || header[0] != "chain" || header[1] != "iter") {
    throw InputError(kModule, std::string(source) + ": draws header must start with chain,iter");
  }
  std::vector<std::string> names;
  std::vector<std::size_t> columns;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i].rfind("a[", 0) == 0) continue;
    names.push_back(header[i]);
    columns.push_back(i);
  }

  std::map<std::pair<int, int>, std::vector<double>> rows;
  int max_chain = 0;
  int max_iter = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split_line(line);
    if (cells.size() != header.size()) {
      throw InputError(kModule, std::string(source) + ":" + std::to_string(line_no) + ": expected " +
                                    std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    std::int64_t chain = 0, iter = 0;
    if (!csv::parse_int(cells[0], chain) || !csv::parse_int(cells[1], iter) || chain < 1 || iter < 1) {
      throw InputError(kModule, std::string(source) + ":" + std::to_string(line_no) + ": bad chain/iter index");
    }
    std::vector<double> values;
    values.reserve(columns.size());
    for (const auto col : columns) {
      double v = 0.0;
      if (!csv::parse_double(cells[col], v)) {
        throw InputError(kModule, std::string(source) + ":" + std::to_string(line_no) + ": non-finite value in column '" + header[col] + "'");
      }
      values.push_back(v);
    }
    if (!rows.emplace(std::pair{static_cast<int>(chain), static_cast<int>(iter)}, std::move(values)).second) {
      throw InputError(kModule, std::string(source) + ":" + std::to_string(line_no) + ": duplicate chain/iter pair");
    }
    max_chain = std::max(max_chain, static_cast<int>(chain));
    max_iter = std::max(max_iter, static_cast<int>(iter));
  }
  if (rows.empty()) throw InputError(kModule, std::string(source) + ": no draws");
  if (rows.size() != static_cast<std::size_t>(max_chain) * static_cast<std::size_t>(max_iter)) {
    throw InputError(kModule, std::string(source) + ": draws do not form a complete chains x iterations grid");
  }
  DrawsMatrix draws(max_chain, max_iter, std::move(names));
  for (const auto& [key, values] : rows) std::copy(values.begin(), values.end(), draws.draw(key.first - 1, key.second - 1).begin());
  return draws;
}

}  // namespace rugbayes
