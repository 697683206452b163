#include <cmath>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "riskhjb/grid.hpp"
#include "test_models.hpp"

using namespace riskhjb;
using riskhjb::testing::mat;
using riskhjb::testing::vec;

namespace {

Lattice line(int nodes, double lo = -1.0, double hi = 1.0, int steps = 10) {
  return Lattice(vec({lo}), vec({hi}), {nodes}, steps, 1.0);
}

Eigen::VectorXd sample(const Lattice& lat, const std::function<double(const Eigen::VectorXd&)>& fn) {
  Eigen::VectorXd v(lat.size());
  for (int i = 0; i < lat.size(); ++i) v(i) = fn(lat.point(i));
  return v;
}

MarketModel with_factor_atom(double lambda, double xi) {
  MarketModel m = testing::zero_market();
  m.nu.atoms.push_back(JumpAtom::factor(lambda, CoefficientFn::constant(mat({{xi}})), 1));
  return m;
}

}  // namespace

TEST_CASE("lattice geometry") {
  const Lattice lat(vec({-1.0, 0.0}), vec({1.0, 2.0}), {11, 21}, 20, 2.0);
  CHECK(lat.size() == 231);
  CHECK(lat.dx(0) == doctest::Approx(0.2));
  CHECK(lat.dx(1) == doctest::Approx(0.1));
  CHECK(lat.dt() == doctest::Approx(0.1));
  CHECK(lat.time(20) == 2.0);
  const int node = lat.index(3, 5);
  CHECK(lat.multi_index(node)[0] == 3);
  CHECK(lat.coord(node, 1) == doctest::Approx(0.5));
  CHECK(lat.nearest_node(vec({-0.39, 0.52})) == node);
  CHECK(lat.on_boundary(lat.index(0, 5)));
  CHECK_FALSE(lat.on_boundary(node));
  for (int i : lat.interior_core()) {
    const Eigen::VectorXd x = lat.point(i);
    CHECK(x(0) >= -0.6 - 1e-12);
    CHECK(x(1) <= 1.6 + 1e-12);
  }
  const Lattice fine = lat.refined(2, 2);
  CHECK(fine.nodes(0) == 21);
  CHECK(fine.time_steps() == 40);
}

TEST_CASE("lattice invariants") {
  CHECK_THROWS_AS(line(7), Error);
  CHECK_THROWS_AS(Lattice(vec({1.0}), vec({1.0}), {10}, 10, 1.0), Error);
  CHECK_THROWS_AS(Lattice(vec({0.0}), vec({1.0}), {10}, 0, 1.0), Error);
  CHECK_THROWS_AS(Lattice(vec({0.0, 0.0, 0.0}), vec({1.0, 1.0, 1.0}), {10, 10, 10}, 5, 1.0), Error);
}

TEST_CASE("interpolation is exact on linear fields and counts clamping") {
  const Lattice lat(vec({-1.0, -1.0}), vec({1.0, 1.0}), {9, 13}, 4, 1.0);
  const auto lin = [](const Eigen::VectorXd& x) { return 0.3 + 1.7 * x(0) - 0.4 * x(1); };
  const Eigen::VectorXd u = sample(lat, lin);
  GridDiagnostics diag;
  for (double a : {-0.93, -0.11, 0.42, 0.999})
    for (double b : {-0.77, 0.05, 0.61})
      CHECK(interpolate(lat, u, vec({a, b}), &diag) == doctest::Approx(lin(vec({a, b}))).epsilon(1e-13));
  CHECK(diag.clamped_targets == 0);
  CHECK(interpolate(lat, u, vec({2.0, 0.0}), &diag) == doctest::Approx(lin(vec({1.0, 0.0}))));
  CHECK(diag.clamped_targets == 1);
}

TEST_CASE("d_a vanishes on constants and without factor atoms") {
  const Lattice lat = line(41);
  const Eigen::VectorXd ones = Eigen::VectorXd::Constant(lat.size(), 2.5);
  CHECK(nonlocal_d_a(ones, 0.0, with_factor_atom(1.0, 0.13), lat).cwiseAbs().maxCoeff() <= 1e-15);
  const Eigen::VectorXd u = sample(lat, [](const Eigen::VectorXd& x) { return std::sin(x(0)); });
  CHECK(nonlocal_d_a(u, 0.0, testing::zero_market(), lat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("d_a of a linear field under a one-cell shift") {
  const Lattice lat = line(41);
  const double dx = lat.dx(0);
  const Eigen::VectorXd u = sample(lat, [](const Eigen::VectorXd& x) { return x(0); });
  const Eigen::VectorXd d = nonlocal_d_a(u, 0.0, with_factor_atom(1.0, dx), lat);
  for (int i = 0; i < lat.size() - 1; ++i) CHECK(d(i) == doctest::Approx(dx).epsilon(1e-12));
  const auto J = jump_operator(0.0, with_factor_atom(1.0, dx), lat);
  CHECK(((J * u) - d).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("d_a converges under refinement for off-grid shifts") {
  const auto fn = [](const Eigen::VectorXd& x) { return std::exp(0.5 * x(0)) * std::cos(2.0 * x(0)); };
  const MarketModel m = with_factor_atom(1.3, 0.0737);
  double prev = 0.0;
  for (int k = 0; k < 4; ++k) {
    const Lattice lat = line(20 * (1 << k) + 1, -2.0, 2.0);
    const Eigen::VectorXd d = nonlocal_d_a(sample(lat, fn), 0.0, m, lat);
    double err = 0.0;
    for (int i : lat.interior_core())
      err = std::max(err, std::abs(d(i) - 1.3 * (fn(lat.point(i) + vec({0.0737})) - fn(lat.point(i)))));
    if (k > 0) CHECK(err <= 0.6 * prev);  // first order or better
    prev = err;
  }
}

TEST_CASE("I_NL is consistent with d_a through the transform") {
  const double theta = 0.7;
  const Lattice lat = line(41);
  const double xi = 2.0 * lat.dx(0);
  const MarketModel m = with_factor_atom(1.0, xi);
  const Eigen::VectorXd u = sample(lat, [](const Eigen::VectorXd& x) { return 0.3 * std::sin(2.0 * x(0)) + x(0) * x(0); });
  Eigen::MatrixXd p(1, lat.size());
  for (int i = 0; i < lat.size(); ++i) p(0, i) = std::cos(3.0 * lat.coord(i, 0));
  MarketModel mt = m;
  mt.theta = theta;
  const Eigen::VectorXd tilde = (-theta * u).array().exp();
  const Eigen::VectorXd d = nonlocal_d_a(tilde, 0.0, mt, lat);
  const Eigen::VectorXd inl = nonlocal_I_NL(u, p, 0.0, mt, lat);
  for (int i = 0; i < lat.size() - 2; ++i) {
    const double expected = -(1.0 / theta) * d(i) / tilde(i) - xi * p(0, i);
    CHECK(inl(i) == doctest::Approx(expected).epsilon(1e-10));
  }

  const Eigen::VectorXd c = Eigen::VectorXd::Constant(lat.size(), 0.4);
  CHECK(nonlocal_I_NL(c, Eigen::MatrixXd::Zero(1, lat.size()), 0.0, mt, lat).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(nonlocal_I_NL(u, p, 0.0, testing::zero_market(), lat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("I_NL flags exponent overflow") {
  const Lattice lat = line(21);
  MarketModel m = with_factor_atom(1.0, 0.1);
  m.theta = 1.0;
  Eigen::VectorXd u = sample(lat, [](const Eigen::VectorXd& x) { return -1e4 * x(0); });
  GridDiagnostics diag;
  const Eigen::VectorXd out = nonlocal_I_NL(u, Eigen::MatrixXd::Zero(1, lat.size()), 0.0, m, lat, &diag);
  CHECK(diag.overflow_nodes > 0);
  CHECK(out.allFinite());
}

TEST_CASE("stencils are exact on linear and quadratic fields") {
  const Lattice lat(vec({-1.0, -2.0}), vec({1.0, 1.0}), {11, 16}, 4, 1.0);
  const Eigen::VectorXd lin = sample(lat, [](const Eigen::VectorXd& x) { return 1.0 + 0.5 * x(0) - 2.0 * x(1); });
  const Eigen::MatrixXd gl = gradient(lin, lat);
  const Eigen::MatrixXd hl = hessian(lin, lat);
  for (int i = 0; i < lat.size(); ++i) {
    CHECK(gl(0, i) == doctest::Approx(0.5).epsilon(1e-11));
    CHECK(gl(1, i) == doctest::Approx(-2.0).epsilon(1e-11));
    CHECK(hl.col(i).cwiseAbs().maxCoeff() <= 1e-9);
  }
  const Eigen::VectorXd q = sample(lat, [](const Eigen::VectorXd& x) { return x(0) * x(0) + 0.5 * x(0) * x(1); });
  const Eigen::MatrixXd hq = hessian(q, lat);
  for (int i = 0; i < lat.size(); ++i) {
    CHECK(hq(0, i) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(hq(1, i) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(hq(2, i) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(hq(3, i)) <= 1e-9);
  }
}

TEST_CASE("gradient of sin converges at second order") {
  double prev = 0.0;
  for (int k = 0; k < 4; ++k) {
    const Lattice lat = line(16 * (1 << k) + 1, 0.0, 2.0);
    const Eigen::MatrixXd gr = gradient(sample(lat, [](const Eigen::VectorXd& x) { return std::sin(x(0)); }), lat);
    double err = 0.0;
    for (int i = 0; i < lat.size(); ++i) err = std::max(err, std::abs(gr(0, i) - std::cos(lat.coord(i, 0))));
    if (k > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.15));
    prev = err;
  }
}

TEST_CASE("CSV and JSON round trips") {
  const Lattice lat(vec({-1.0, 0.0}), vec({1.0, 1.0}), {9, 8}, 3, 0.5);
  CHECK(lattice_to_json(lattice_from_json(lattice_to_json(lat))) == lattice_to_json(lat));

  ValueField v;
  v.kind = ValueKind::Transformed;
  v.values = Eigen::MatrixXd::Random(4, lat.size()).array() + 2.0;
  std::stringstream vs;
  write_value_csv(vs, v, lat);
  CHECK(vs.str().rfind("t,x0,x1,value\n", 0) == 0);
  const ValueField back = read_value_csv(vs, lat, ValueKind::Transformed);
  CHECK((back.values - v.values).cwiseAbs().maxCoeff() == 0.0);

  PolicyField p;
  for (int k = 0; k <= 3; ++k) p.h.push_back(Eigen::MatrixXd::Random(2, lat.size()));
  std::stringstream ps;
  write_policy_csv(ps, p, lat);
  const PolicyField pb = read_policy_csv(ps, lat, 2);
  for (int k = 0; k <= 3; ++k) CHECK((pb.h[static_cast<std::size_t>(k)] - p.h[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream bad("t,x0,x1,value\n0,5,5,1\n");
  CHECK_THROWS_AS(read_value_csv(bad, lat, ValueKind::Transformed), Error);
}
