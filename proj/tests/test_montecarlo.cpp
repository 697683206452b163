#include <cmath>
#include <numeric>

#include "doctest.h"
#include "riskhjb/montecarlo.hpp"
#include "riskhjb/solver.hpp"
#include "test_models.hpp"

using namespace riskhjb;
using riskhjb::testing::mat;
using riskhjb::testing::vec;

namespace {

SimConfig sim(long long paths, std::uint64_t seed = 3) {
  SimConfig c;
  c.paths = paths;
  c.dt = 0.01;
  c.seed = seed;
  return c;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(v.size() - 1);
  return m;
}

std::vector<double> terminal(const PathBundle& b) {
  std::vector<double> out;
  for (const auto& p : b.paths) out.push_back(p.X(0, p.X.cols() - 1));
  return out;
}

}  // namespace

TEST_CASE("factor paths have the Gaussian moments of the drift and diffusion") {
  MarketModel m = testing::zero_market();
  const auto b0 = terminal(simulate_factors(m, Policy::constant(vec({0.0})), vec({0.2}), 0.0, sim(20000)));
  const Moments s0 = moments(b0);
  CHECK(std::abs(s0.mean - 0.2) <= 4.0 * std::sqrt(s0.var / 20000.0));
  CHECK(s0.var == doctest::Approx(0.09).epsilon(0.05));

  m.factor.b = CoefficientFn::constant(mat({{0.25}}));
  const auto b1 = terminal(simulate_factors(m, Policy::constant(vec({0.0})), vec({0.2}), 0.0, sim(20000)));
  const Moments s1 = moments(b1);
  CHECK(std::abs(s1.mean - 0.45) <= 4.0 * std::sqrt(s1.var / 20000.0));
}

TEST_CASE("compensated factor jumps leave the mean unchanged") {
  MarketModel m = testing::zero_market();
  m.nu.atoms.push_back(JumpAtom::factor(2.0, CoefficientFn::constant(mat({{0.1}})), 1));
  const PathBundle b = simulate_factors(m, Policy::constant(vec({0.0})), vec({0.0}), 0.0, sim(20000));
  const Moments s = moments(terminal(b));
  CHECK(std::abs(s.mean) <= 4.0 * std::sqrt(s.var / 20000.0));
  CHECK(s.var == doctest::Approx(0.09 + 2.0 * 0.01).epsilon(0.05));
  std::size_t jumps = 0;
  for (const auto& p : b.paths) jumps += p.jumps.size();
  CHECK(static_cast<double>(jumps) / 20000.0 == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("Doleans exponential is one at zero control and mean one otherwise") {
  const MarketModel m = testing::jump_model();
  const Policy zero = Policy::constant(vec({0.0}));
  const PathBundle b = simulate_factors(m, zero, vec({0.0}), 0.0, sim(2000));
  for (double chi : doleans_chi(b, zero, m)) CHECK(chi == doctest::Approx(1.0).epsilon(1e-14));

  const Policy h = Policy::constant(vec({0.8}));
  const SimEstimate e = estimate_chi_mean(m, h, 0.0, vec({0.0}), sim(20000));
  CHECK(std::abs(e.mean - 1.0) <= 4.0 * e.std_error);
  CHECK(e.excluded_paths == 0);
}

TEST_CASE("Doleans exponential is lognormal without jumps") {
  const MarketModel m = testing::zero_market(2.0);
  const Policy h = Policy::constant(vec({1.5}));
  const PathBundle b = simulate_factors(m, h, vec({0.0}), 0.0, sim(40000));
  const Moments s = moments(doleans_chi(b, h, m));
  const double v = std::pow(2.0 * 1.5 * 0.2, 2);  // (theta |Sigma' h|)^2 T
  CHECK(s.var == doctest::Approx(std::exp(v) - 1.0).epsilon(0.1));

  const SimEstimate e = estimate_chi_mean(m, h, 0.0, vec({0.0}), sim(2000));
  const SimEstimate replay = [&] {
    const PathBundle rb = simulate_factors(m, h, vec({0.0}), 0.0, sim(2000));
    const auto chi = doleans_chi(rb, h, m);
    SimEstimate out;
    out.mean = std::accumulate(chi.begin(), chi.end(), 0.0) / 2000.0;
    return out;
  }();
  CHECK(e.mean == doctest::Approx(replay.mean).epsilon(1e-12));
}

TEST_CASE("transformed value is exact for deterministic rates") {
  const double c = 0.04, theta = 1.5;
  for (Measure meas : {Measure::P, Measure::Ph}) {
    SimConfig cfg = sim(500);
    cfg.measure = meas;
    const SimEstimate e = estimate_I_tilde(testing::constant_rate(c, theta), Policy::constant(vec({0.0})), 0.0,
                                           vec({0.0}), cfg);
    CHECK(e.mean == doctest::Approx(std::exp(-theta * c)).epsilon(1e-12));
    CHECK(e.std_error <= 1e-12);
    const SimEstimate z = estimate_I_tilde(testing::zero_market(), Policy::constant(vec({0.0})), 0.0,
                                           vec({0.0}), cfg);
    CHECK(z.mean == 1.0);
  }
  const WealthEstimate w =
      estimate_J_wealth(testing::constant_rate(c, theta), Policy::constant(vec({0.0})), vec({0.0}), 0.0, sim(500));
  CHECK(w.J.mean == doctest::Approx(c).epsilon(1e-12));
  CHECK(w.var_log_wealth <= 1e-24);
}

TEST_CASE("both measures estimate the same transformed value") {
  const MarketModel m = testing::jump_model();
  const Policy h = Policy::constant(vec({0.3}));
  SimConfig cp = sim(20000);
  SimConfig ch = cp;
  ch.measure = Measure::Ph;
  const SimEstimate p = estimate_I_tilde(m, h, 0.0, vec({0.2}), cp);
  const SimEstimate q = estimate_I_tilde(m, h, 0.0, vec({0.2}), ch);
  CHECK(std::abs(p.mean - q.mean) <= 4.0 * std::hypot(p.std_error, q.std_error));
}

TEST_CASE("log wealth is Gaussian under a constant control") {
  const MarketModel m = testing::zero_market(1.0);
  const WealthEstimate w = estimate_J_wealth(m, Policy::constant(vec({0.5})), vec({0.0}), 0.0, sim(40000));
  const double s2 = 0.5 * 0.5 * 0.04;
  CHECK(std::abs(w.mean_log_wealth + 0.5 * s2) <= 4.0 * std::sqrt(s2 / 40000.0));
  CHECK(w.var_log_wealth == doctest::Approx(s2).epsilon(0.05));
}

TEST_CASE("estimates are reproducible and independent of the thread count") {
  const MarketModel m = testing::jump_model();
  const Policy h = Policy::constant(vec({0.4}));
  SimConfig a = sim(3000, 17);
  a.threads = 1;
  SimConfig b = a;
  b.threads = 3;
  const SimEstimate e1 = estimate_I_tilde(m, h, 0.0, vec({0.1}), a);
  const SimEstimate e2 = estimate_I_tilde(m, h, 0.0, vec({0.1}), a);
  const SimEstimate e3 = estimate_I_tilde(m, h, 0.0, vec({0.1}), b);
  CHECK(e1.mean == e2.mean);
  CHECK(e1.mean == e3.mean);
  CHECK(e1.std_error == e3.std_error);
  SimConfig other = a;
  other.seed = 18;
  CHECK(estimate_I_tilde(m, h, 0.0, vec({0.1}), other).mean != e1.mean);
}

TEST_CASE("antithetic pairs keep the estimator unbiased") {
  const MarketModel m = testing::zero_market(1.0);
  SimConfig c = sim(20000);
  c.antithetic = true;
  const SimEstimate e = estimate_chi_mean(m, Policy::constant(vec({1.0})), 0.0, vec({0.0}), c);
  CHECK(std::abs(e.mean - 1.0) <= 4.0 * e.std_error);
}

TEST_CASE("solved policy lookups stay inside the box") {
  const MarketModel m = testing::lgq_model();
  const Lattice lat = testing::default_lattice(m, 41, 20);
  const SolveResult res = policy_iteration_solve(m, lat);
  const Policy p = Policy::field(res.policy, lat);
  Eigen::VectorXd out(1);
  CHECK_FALSE(p.evaluate(0.0, vec({0.3}), out));
  CHECK(p.evaluate(0.0, vec({5.0}), out));
  const SimEstimate e = estimate_I_tilde(m, p, 0.0, vec({0.0}), sim(2000));
  CHECK(static_cast<double>(e.clamped_steps) <= 0.01 * static_cast<double>(e.path_steps));
}

TEST_CASE("pairwise summation and argument checks") {
  std::vector<double> v(1000000, 0.1);
  CHECK(std::abs(pairwise_sum(v.data(), v.size()) - 1e5) <= 1e-8);
  const double three[] = {1.0, 2.0, 3.0};
  CHECK(pairwise_sum(three, 3) == 6.0);
  CHECK(pairwise_sum(three, 0) == 0.0);

  SimConfig c = sim(100);
  c.dt = 0.05;  // larger than T / 50
  CHECK_THROWS_AS(estimate_chi_mean(testing::zero_market(), Policy::constant(vec({0.0})), 0.0, vec({0.0}), c),
                  Error);
  CHECK(worker_threads(2) >= 1);
}
