#include <cmath>
#include <random>

#include "doctest.h"
#include "riskhjb/hamiltonian.hpp"
#include "riskhjb/oracle.hpp"
#include "test_models.hpp"

using namespace riskhjb;
using riskhjb::testing::mat;
using riskhjb::testing::vec;

namespace {

LGQSpec flat_spec(Eigen::Index n, Eigen::Index m) {
  LGQSpec s;
  s.b0 = Eigen::VectorXd::Zero(n);
  s.B = Eigen::MatrixXd::Zero(n, n);
  s.Lambda = Eigen::MatrixXd::Zero(n, n + m);
  s.Lambda.leftCols(n) = 0.3 * Eigen::MatrixXd::Identity(n, n);
  s.a_hat0 = Eigen::VectorXd::Zero(m);
  s.A = Eigen::MatrixXd::Zero(m, n);
  s.Sigma = Eigen::MatrixXd::Zero(m, n + m);
  s.Sigma.rightCols(m) = 0.2 * Eigen::MatrixXd::Identity(m, m);
  s.c1 = Eigen::VectorXd::Zero(n);
  return s;
}

std::vector<std::pair<double, Eigen::VectorXd>> probes(Eigen::Index n, int count, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), t(0.05, 0.95);
  std::vector<std::pair<double, Eigen::VectorXd>> out;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x(n);
    for (Eigen::Index j = 0; j < n; ++j) x(j) = u(gen);
    out.emplace_back(t(gen), x);
  }
  return out;
}

LGQSpec random_spec(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 2);
  const Eigen::Index n = dim(gen), m = dim(gen);
  LGQSpec s = flat_spec(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.b0(i) = 0.1 * u(gen);
    for (Eigen::Index j = 0; j < n; ++j) s.B(i, j) = (i == j ? -0.6 : 0.1) + 0.1 * u(gen);
    for (Eigen::Index j = 0; j < n + m; ++j) s.Lambda(i, j) += 0.05 * u(gen);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    s.a_hat0(i) = 0.05 * u(gen);
    for (Eigen::Index j = 0; j < n; ++j) s.A(i, j) = 0.1 * u(gen);
    for (Eigen::Index j = 0; j < n + m; ++j) s.Sigma(i, j) += 0.05 * u(gen);
  }
  s.c0 = 0.02 + 0.01 * u(gen);
  for (Eigen::Index j = 0; j < n; ++j) s.c1(j) = 0.01 * u(gen);
  s.theta = 0.2 + 1.5 * std::abs(u(gen));
  s.T = 1.0;
  return s;
}

}  // namespace

TEST_CASE("zero market has the zero quadratic value") {
  const LGQSpec s = flat_spec(1, 1);
  const RiccatiSolution sol = riccati_solve(s, 200);
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    CHECK(sol.Q[i].cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.q[i].cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.k[i] == 0.0);
  }
  CHECK(verify_ansatz(s, sol, probes(1, 20, 1)) == 0.0);
}

TEST_CASE("constant coefficients give a value linear in time") {
  LGQSpec s = flat_spec(1, 2);
  s.c0 = 0.03;
  s.a_hat0 = vec({0.05, -0.02});
  s.Sigma = mat({{0.1, 0.2, 0.0}, {0.0, 0.05, 0.15}});
  s.theta = 0.8;
  s.T = 2.0;
  const RiccatiSolution sol = riccati_solve(s, 400);
  const Eigen::MatrixXd S = (s.theta + 1.0) * s.Sigma * s.Sigma.transpose();
  const double rate = s.c0 + 0.5 * s.a_hat0.dot(S.llt().solve(s.a_hat0));
  for (std::size_t i = 0; i < sol.times.size(); i += 50) {
    CHECK(sol.Q[i].cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(sol.k[i] == doctest::Approx(rate * (s.T - sol.times[i])).epsilon(1e-12));
  }
  CHECK(sol.policy(s, 0, vec({0.4})).isApprox(S.llt().solve(s.a_hat0), 1e-12));
}

TEST_CASE("ansatz residual grows linearly with a perturbation of Q") {
  LGQSpec s = flat_spec(1, 1);
  s.B = mat({{-0.5}});
  s.A = mat({{0.1}});
  s.a_hat0 = vec({0.04});
  s.c0 = 0.02;
  s.c1 = vec({0.01});
  s.Sigma = mat({{0.1, 0.2}});
  s.theta = 0.5;
  const RiccatiSolution sol = riccati_solve(s, 2000);
  const auto pts = probes(1, 30, 4);
  CHECK(verify_ansatz(s, sol, pts) <= 1e-9);
  auto perturbed = [&](double eps) {
    RiccatiSolution p = sol;
    for (auto& Q : p.Q) Q.array() += eps;
    return verify_ansatz(s, p, pts);
  };
  const double r1 = perturbed(1e-4), r2 = perturbed(2e-4);
  CHECK(r1 > 1e-6);
  CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("random linear-Gaussian specs satisfy the ansatz") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 20; ++trial) {
    const LGQSpec s = random_spec(gen);
    CAPTURE(trial);
    const RiccatiSolution sol = riccati_solve(s, 2000);
    CHECK(verify_ansatz(s, sol, probes(s.n(), 10, static_cast<unsigned>(trial))) <= 1e-6);
  }
}

TEST_CASE("model round trip and rejection of non-Gaussian models") {
  const MarketModel m = testing::lgq_model();
  const LGQSpec s = lgq_from_model(m, vec({-1.5}), vec({1.5}));
  CHECK(s.B(0, 0) == doctest::Approx(-0.5));
  CHECK(s.A(0, 0) == doctest::Approx(0.1));
  CHECK(s.a_hat0(0) == doctest::Approx(0.04));
  CHECK(s.c1(0) == doctest::Approx(0.01));
  const LGQSpec back = lgq_from_model(lgq_to_model(s), vec({-1.5}), vec({1.5}));
  CHECK(back.A.isApprox(s.A));
  CHECK(back.c0 == doctest::Approx(s.c0));

  CHECK_THROWS_AS(lgq_from_model(testing::jump_model(), vec({-1.5}), vec({1.5})), Error);
  CHECK_THROWS_AS(lgq_from_model(m, vec({-30.0}), vec({30.0})), Error);  // caps bind
}

TEST_CASE("brute-force argmin lands within one cell of the minimiser") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const MarketModel m = testing::jump_model();
  const int density = 1001;
  const auto [lo, hi] = brute_force_box(m, 10.0);
  const double cell = (hi(0) - lo(0)) / (density - 1);
  for (int i = 0; i < 20; ++i) {
    HamiltonianInputs in;
    in.t = 0.5 * (u(gen) + 1.0);
    in.x = vec({u(gen)});
    in.r = 0.5 + std::abs(u(gen));
    in.p = vec({0.5 * u(gen)});
    const Eigen::VectorXd exact = minimize_hamiltonian(in, m, {}).h_star;
    const Eigen::VectorXd brute = brute_force_argmin(in, m, density);
    CHECK(std::abs(exact(0) - brute(0)) <= cell);
  }
}

TEST_CASE("brute-force search on degenerate and empty constraint sets") {
  HamiltonianInputs in;
  in.x = vec({0.2});
  in.p = vec({0.1});
  MarketModel m = testing::lgq_model();
  m.constraints.Upsilon = mat({{1.0, -1.0}});
  m.constraints.upsilon = vec({0.0, 0.0});
  CHECK(brute_force_argmin(in, m, 101)(0) == 0.0);

  m.constraints.upsilon = vec({-1.0, -1.0});
  try {
    brute_force_argmin(in, m, 101);
    FAIL("expected InfeasibleProblem");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleProblem);
  }
}

TEST_CASE("Riccati output serialises at requested times") {
  const LGQSpec s = lgq_from_model(testing::lgq_model(), vec({-1.5}), vec({1.5}));
  const RiccatiSolution sol = riccati_solve(s, 100);
  const auto j = riccati_to_json(sol, {0.0, 0.5, 1.0});
  REQUIRE(j.size() == 3);
  CHECK(j[2]["k"].get<double>() == 0.0);
  CHECK(j[0]["k"].get<double>() == doctest::Approx(sol.k.front()));
}
