#include <doctest.h>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "rugbayes/errors.hpp"
#include "rugbayes/model.hpp"
#include "test_support.hpp"

using namespace rugbayes;
using rugbayes::testing::config_for;
using rugbayes::testing::random_state;
using rugbayes::testing::small_instance;

namespace {

// Central finite differences of log_posterior.
std::vector<double> fd_gradient(const ScoreModel& m, std::vector<double> theta, double h) {
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double x = theta[i];
    theta[i] = x + h;
    const double up = m.log_posterior(theta);
    theta[i] = x - h;
    const double down = m.log_posterior(theta);
    theta[i] = x;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

FeatureSet one_game_instance(double y) {
  FeatureSet fs;
  fs.nteams = 2;
  fs.nweeks = 1;
  fs.prevperf = {0.75, 0.25};
  fs.observations.push_back({0, 1, 1, 1, y, y, 0.5, 0.25, 1, 0});
  return fs;
}

}  // namespace

TEST_CASE("parameter layout covers the vector exactly once") {
  for (const auto v : {Variant::I, Variant::II, Variant::III, Variant::IV}) {
    const ParameterLayout layout(v, 3, 4);
    const std::size_t betas = 3 + (v != Variant::I) + (v == Variant::III || v == Variant::IV);
    CHECK(layout.size() == betas + 2 + 3 + 12);
    auto names = layout.names();
    CHECK(names.size() == layout.size());
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
    for (const auto& n : names) CHECK(!n.empty());
  }
  const ParameterLayout l1(Variant::I, 2, 2);
  CHECK(!l1.b_atten());
  CHECK(!l1.b_day());
  CHECK(l1.names()[l1.eta(2, 1)] == "eta[2,2]");
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.variant = Variant::IV;
  CHECK_THROWS_AS(c.validate(), InputError);
  c.prevperf_mode = PrevperfMode::points;
  CHECK_NOTHROW(c.validate());
  c.priors.eta_sd = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  CHECK(parse_variant("III") == Variant::III);
  CHECK_THROWS_AS(parse_variant("V"), InputError);
}

TEST_CASE("ability recursion") {
  FeatureSet fs;
  fs.nteams = 2;
  fs.nweeks = 2;
  fs.prevperf = {1.0, 0.5};
  const ScoreModel m(fs, config_for(Variant::I));
  const auto& L = m.layout();
  std::vector<double> theta(m.dim(), 0.0);
  theta[L.b_prev()] = 2.0;
  theta[L.eta(1, 0)] = 0.3;
  theta[L.eta(1, 1)] = -0.1;
  theta[L.sigma_a(0)] = 0.5;
  theta[L.sigma_a(1)] = 2.0;
  theta[L.eta(2, 0)] = 1.0;
  theta[L.eta(2, 1)] = -0.25;
  const auto a = m.build_abilities(theta);
  CHECK(a(1, 0) == doctest::Approx(2.3));
  CHECK(a(1, 1) == doctest::Approx(0.9));
  CHECK(a(2, 0) == doctest::Approx(2.8));
  CHECK(a(2, 1) == doctest::Approx(0.4));

  // All eta zero: abilities collapse to b_prev * prevperf.
  std::fill(theta.begin() + static_cast<std::ptrdiff_t>(L.eta_offset()), theta.end(), 0.0);
  const auto flat = m.build_abilities(theta);
  for (int w = 1; w <= 2; ++w) {
    CHECK(flat(w, 0) == doctest::Approx(2.0));
    CHECK(flat(w, 1) == doctest::Approx(1.0));
  }
  // Zero random-walk scale: constant over weeks even with eta.
  theta[L.eta(1, 0)] = 0.7;
  theta[L.eta(2, 0)] = 5.0;
  theta[L.sigma_a(0)] = 0.0;
  const auto frozen = m.build_abilities(theta);
  CHECK(frozen(2, 0) == frozen(1, 0));
}

TEST_CASE("location of a game") {
  auto fs = one_game_instance(0.0);
  fs.observations[0] = {0, 1, 1, 1, 0.0, 0.0, 0.4, 0.4, 0, 0};
  fs.prevperf = {0.5, 0.5};
  const ScoreModel m1(fs, config_for(Variant::I));
  std::vector<double> theta(m1.dim(), 0.0);
  theta[ParameterLayout::b_home()] = 0.42;
  theta[ParameterLayout::b_effort()] = 3.0;
  theta[ParameterLayout::b_prev()] = 1.3;
  CHECK(m1.location(fs.observations[0], m1.build_abilities(theta), theta) == doctest::Approx(0.42));

  fs.observations[0] = {0, 1, 1, 1, 0.0, 0.0, 0.35, 0.25, 0, 1};
  const ScoreModel m2(fs, config_for(Variant::II));
  std::vector<double> t2(m2.dim(), 0.0);
  t2[ParameterLayout::b_effort()] = 3.114;
  t2[ParameterLayout::b_home()] = 0.324;
  t2[*m2.layout().b_atten()] = 0.376;
  CHECK(m2.location(fs.observations[0], m2.build_abilities(t2), t2) == doctest::Approx(0.6354).epsilon(1e-12));
}

TEST_CASE("location matches a scalar recomputation") {
  std::mt19937_64 rng(99);
  const auto fs = small_instance(4);
  const ScoreModel m(fs, config_for(Variant::III));
  const auto& L = m.layout();
  for (int trial = 0; trial < 20; ++trial) {
    const auto theta = random_state(m.dim(), rng);
    const auto a = m.build_abilities(theta);
    for (const auto& g : fs.observations) {
      // Walk each team's ability forward explicitly.
      auto ability = [&](int team, int week) {
        double v = theta[L.b_prev()] * fs.prevperf[team] + theta[L.eta(1, team)];
        for (int w = 2; w <= week; ++w) v += theta[L.sigma_a(team)] * theta[L.eta(w, team)];
        return v;
      };
      const double expected = ability(g.home_idx, g.home_week) - ability(g.away_idx, g.away_week) +
                              theta[L.b_effort()] * (g.eff_home - g.eff_away) + theta[L.b_home()] +
                              theta[*L.b_atten()] * g.atten + theta[*L.b_day()] * g.day;
      CHECK(m.location(g, a, theta) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("log prior closed forms") {
  FeatureSet fs;
  fs.nteams = 2;
  fs.nweeks = 2;
  fs.prevperf = {0.3, 0.6};
  const ScoreModel m(fs, config_for(Variant::III));
  const auto& L = m.layout();
  std::vector<double> theta(m.dim(), 0.0);
  for (auto i : {L.b_home(), L.b_prev(), L.b_effort(), *L.b_atten(), *L.b_day()}) theta[i] = 0.5;
  theta[L.log_nu()] = std::log(18.0);
  theta[L.log_sigma_y()] = std::log(0.5);
  // Frozen from scipy.stats (normal/gamma logpdf plus log-Jacobians).
  CHECK(m.log_prior(theta) == doctest::Approx(-4.17223237750742).epsilon(1e-12));

  CHECK(gamma_log_density(18.0, 9.0, 0.5) == doctest::Approx(-2.7199534646154397).epsilon(1e-13));
  const boost::math::gamma_distribution<double> g(9.0, 2.0);
  CHECK(gamma_log_density(18.0, 9.0, 0.5) == doctest::Approx(std::log(boost::math::pdf(g, 18.0))).epsilon(1e-13));
  CHECK(gamma_log_density(16.0, 9.0, 0.5) > gamma_log_density(18.0, 9.0, 0.5));  // mode at 16
  CHECK(gamma_log_density(16.0, 9.0, 0.5) > gamma_log_density(14.0, 9.0, 0.5));

  auto shifted = theta;
  shifted[L.eta(2, 1)] += 1.0;
  CHECK(m.log_prior(shifted) - m.log_prior(theta) ==
        doctest::Approx(normal_log_density(1.0, 0.0, 0.5) - normal_log_density(0.0, 0.0, 0.5)).epsilon(1e-12));

  auto low_nu = theta;
  low_nu[L.log_nu()] = std::log(0.05);
  CHECK(m.log_prior(low_nu) == -std::numeric_limits<double>::infinity());
  CHECK(m.log_posterior(low_nu) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("Student-t likelihood limits") {
  CHECK(student_t_log_density(0.3, 1.0, 0.3, 1.0) == doctest::Approx(-1.1447298858494002).epsilon(1e-14));
  for (const double c : {0.5, 2.0, 7.5}) {
    CHECK(student_t_log_density(1.0, 4.0, 1.0, c) ==
          doctest::Approx(student_t_log_density(1.0, 4.0, 1.0, 1.0) - std::log(c)).epsilon(1e-13));
  }
  CHECK(std::abs(student_t_log_density(0.7, 1e6, 0.0, 1.0) - normal_log_density(0.7, 0.0, 1.0)) < 1e-4);
  for (const double nu : {0.5, 3.0, 30.0, 1e5}) {
    const boost::math::students_t_distribution<double> t(nu);
    for (const double z : {-3.0, 0.1, 2.5}) {
      CHECK(student_t_log_density(1.0 + 2.0 * z, nu, 1.0, 2.0) == doctest::Approx(std::log(boost::math::pdf(t, z) / 2.0)).epsilon(1e-11));
    }
  }

  // Through the model: one game with y at the location.
  const auto probe = one_game_instance(0.0);
  const ScoreModel pm(probe, config_for(Variant::II));
  std::vector<double> theta(pm.dim(), 0.1);
  theta[pm.layout().log_nu()] = 0.0;
  theta[pm.layout().log_sigma_y()] = 0.0;
  const double mu = pm.location(probe.observations[0], pm.build_abilities(theta), theta);
  const ScoreModel exact(one_game_instance(mu), config_for(Variant::II));
  CHECK(exact.log_likelihood(theta) == doctest::Approx(std::log(1.0 / std::numbers::pi)).epsilon(1e-13));
  theta[pm.layout().log_sigma_y()] = std::log(3.0);
  CHECK(exact.log_likelihood(theta) == doctest::Approx(std::log(1.0 / std::numbers::pi) - std::log(3.0)).epsilon(1e-13));
}

TEST_CASE("log posterior") {
  FeatureSet empty;
  empty.nteams = 3;
  empty.nweeks = 4;
  empty.prevperf = {0.1, 0.5, 0.9};
  const ScoreModel prior_only(empty, config_for(Variant::III));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const auto theta = random_state(prior_only.dim(), rng);
    CHECK(prior_only.log_posterior(theta) == prior_only.log_prior(theta));
    CHECK(prior_only.log_likelihood(theta) == 0.0);
  }

  auto off = config_for(Variant::III);
  off.likelihood = false;
  const ScoreModel silent(small_instance(2), off);
  for (int i = 0; i < 10; ++i) {
    const auto theta = random_state(silent.dim(), rng);
    std::vector<double> g(silent.dim());
    CHECK(silent.log_posterior(theta) == silent.log_prior(theta));
    CHECK(silent.log_posterior_gradient(theta, g) == silent.log_prior(theta));
    const auto fd = fd_gradient(silent, theta, 1e-5);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(rel_err(g[k], fd[k]) < 1e-6);
  }

  // Hand instance frozen from scipy.stats.
  const ScoreModel m(one_game_instance(0.9), config_for(Variant::II));
  const auto& L = m.layout();
  std::vector<double> theta(m.dim());
  theta[L.b_home()] = 0.3;
  theta[L.b_prev()] = 1.2;
  theta[L.b_effort()] = 2.0;
  theta[*L.b_atten()] = -0.4;
  theta[L.log_nu()] = std::log(7.0);
  theta[L.log_sigma_y()] = std::log(1.3);
  theta[L.sigma_a(0)] = 0.05;
  theta[L.sigma_a(1)] = -0.02;
  theta[L.eta(1, 0)] = 0.1;
  theta[L.eta(1, 1)] = -0.2;
  CHECK(m.location(m.features().observations[0], m.build_abilities(theta), theta) == doctest::Approx(1.3).epsilon(1e-14));
  CHECK(m.log_likelihood(theta) == doctest::Approx(-1.270635579235377).epsilon(1e-12));
  CHECK(m.log_prior(theta) == doctest::Approx(-7.2063541735535175).epsilon(1e-12));
  CHECK(m.log_posterior(theta) == doctest::Approx(-8.476989752788894).epsilon(1e-12));

  const ScoreModel big(small_instance(3), config_for(Variant::IV));
  for (int i = 0; i < 50; ++i) CHECK(std::isfinite(big.log_posterior(random_state(big.dim(), rng))));
}

TEST_CASE("analytic gradient matches central differences on every block") {
  std::mt19937_64 rng(2024);
  for (const auto v : {Variant::I, Variant::II, Variant::III, Variant::IV}) {
    const ScoreModel m(small_instance(static_cast<std::uint64_t>(v) + 10), config_for(v));
    for (int trial = 0; trial < 20; ++trial) {
      const auto theta = random_state(m.dim(), rng);
      std::vector<double> grad(m.dim());
      const double lp = m.log_posterior_gradient(theta, grad);
      CHECK(lp == doctest::Approx(m.log_posterior(theta)).epsilon(1e-13));
      const auto fd = fd_gradient(m, theta, 1e-5);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        INFO("variant " << to_string(v) << " coordinate " << m.layout().names()[i]);
        CHECK(rel_err(grad[i], fd[i]) < 1e-6);
      }
    }
  }
}

TEST_CASE("day flags do not enter models without a day term") {
  auto fs = small_instance(7);
  auto flipped = fs;
  for (auto& g : flipped.observations) g.day = 1 - g.day;
  std::mt19937_64 rng(8);
  for (const auto v : {Variant::I, Variant::II}) {
    const ScoreModel a(fs, config_for(v));
    const ScoreModel b(flipped, config_for(v));
    CHECK(!a.layout().b_day());
    const auto theta = random_state(a.dim(), rng);
    CHECK(a.log_posterior(theta) == b.log_posterior(theta));
  }
}

TEST_CASE("transform round trip") {
  const ScoreModel m(small_instance(2), config_for(Variant::II));
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    auto constrained = m.constrain(random_state(m.dim(), rng, 6.0));
    const auto back = m.constrain(m.unconstrain(constrained));
    for (std::size_t k = 0; k < back.size(); ++k) CHECK(std::abs(back[k] - constrained[k]) <= 1e-12 * std::max(1.0, std::abs(constrained[k])));
  }
}

TEST_CASE("a common shift of week-one eta leaves the likelihood unchanged") {
  const ScoreModel m(small_instance(5), config_for(Variant::III));
  const auto& L = m.layout();
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    auto theta = random_state(m.dim(), rng);
    const auto base = m.build_abilities(theta);
    const double ll = m.log_likelihood(theta);
    const double c = 1.7;
    for (int t = 0; t < L.nteams(); ++t) theta[L.eta(1, t)] += c;
    const auto moved = m.build_abilities(theta);
    for (int w = 1; w <= L.nweeks(); ++w) {
      for (int t = 0; t < L.nteams(); ++t) CHECK(moved(w, t) == doctest::Approx(base(w, t) + c).epsilon(1e-12));
    }
    CHECK(m.log_likelihood(theta) == doctest::Approx(ll).epsilon(1e-12));
  }
}

TEST_CASE("swapping home and away with negated outcome keeps the density") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 20; ++i) {
    auto fs = small_instance(100 + static_cast<std::uint64_t>(i));
    fs.observations.resize(1);
    auto swapped = fs;
    auto& g = swapped.observations[0];
    std::swap(g.home_idx, g.away_idx);
    std::swap(g.home_week, g.away_week);
    std::swap(g.eff_home, g.eff_away);
    g.y = -g.y;
    const ScoreModel a(fs, config_for(Variant::III));
    const ScoreModel b(swapped, config_for(Variant::III));
    auto theta = random_state(a.dim(), rng);
    theta[ParameterLayout::b_home()] = 0.0;
    theta[*a.layout().b_atten()] = 0.0;
    theta[*a.layout().b_day()] = 0.0;
    CHECK(a.log_likelihood(theta) == doctest::Approx(b.log_likelihood(theta)).epsilon(1e-13));
  }
}

TEST_CASE("gradient vanishes at a posterior mode found by ascent") {
  // A weakly-determined instance: many games between two teams in one week
  // each would collapse, so use the 3-team instance with tight noise priors.
  auto fs = small_instance(21);
  auto cfg = config_for(Variant::II);
  const ScoreModel m(fs, cfg);
  const std::size_t d = m.dim();
  std::vector<double> theta(d, 0.0);
  std::vector<double> grad(d), trial_grad(d);
  double lp = m.log_posterior_gradient(theta, grad);

  // Gradient ascent with backtracking, then Newton steps on a
  // finite-difference Hessian of the analytic gradient.
  for (int it = 0; it < 5000; ++it) {
    double step = 1.0;
    while (step > 1e-12) {
      std::vector<double> cand(d);
      for (std::size_t i = 0; i < d; ++i) cand[i] = theta[i] + step * grad[i];
      const double c = m.log_posterior(cand);
      if (c > lp) {
        theta = cand;
        lp = m.log_posterior_gradient(theta, grad);
        break;
      }
      step *= 0.5;
    }
  }
  for (int it = 0; it < 20; ++it) {
    std::vector<double> hess(d * d);
    const double h = 1e-6;
    for (std::size_t j = 0; j < d; ++j) {
      auto up = theta, down = theta;
      up[j] += h;
      down[j] -= h;
      std::vector<double> gu(d), gd(d);
      m.log_posterior_gradient(up, gu);
      m.log_posterior_gradient(down, gd);
      for (std::size_t i = 0; i < d; ++i) hess[i * d + j] = (gu[i] - gd[i]) / (2 * h);
    }
    // Solve H x = -g by Gaussian elimination with partial pivoting.
    std::vector<double> a = hess, b(d);
    for (std::size_t i = 0; i < d; ++i) b[i] = -grad[i];
    for (std::size_t col = 0; col < d; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < d; ++r) {
        if (std::abs(a[r * d + col]) > std::abs(a[piv * d + col])) piv = r;
      }
      for (std::size_t k = 0; k < d; ++k) std::swap(a[col * d + k], a[piv * d + k]);
      std::swap(b[col], b[piv]);
      for (std::size_t r = col + 1; r < d; ++r) {
        const double f = a[r * d + col] / a[col * d + col];
        for (std::size_t k = col; k < d; ++k) a[r * d + k] -= f * a[col * d + k];
        b[r] -= f * b[col];
      }
    }
    std::vector<double> x(d);
    for (std::size_t i = d; i-- > 0;) {
      double s = b[i];
      for (std::size_t k = i + 1; k < d; ++k) s -= a[i * d + k] * x[k];
      x[i] = s / a[i * d + i];
    }
    for (std::size_t i = 0; i < d; ++i) theta[i] += x[i];
    lp = m.log_posterior_gradient(theta, grad);
  }
  double norm = 0.0;
  for (const double g : grad) norm += g * g;
  CHECK(std::sqrt(norm) < 1e-6);
  CHECK(std::isfinite(lp));
  CHECK(std::exp(theta[m.layout().log_sigma_y()]) > 0.05);  // a proper interior mode
}
