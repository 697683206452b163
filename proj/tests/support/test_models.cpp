#include "test_models.hpp"

namespace riskhjb::testing {

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

namespace {

CoefficientFn saturated_scalar(double value, double slope, double cap) {
  return CoefficientFn::affine_saturated(mat({{value}}), mat({{slope}}), vec({0.0}), vec({-cap}), vec({cap}));
}

}  // namespace

MarketModel zero_market(double theta, double T) {
  MarketModel model;
  model.factor.n = 1;
  model.factor.b = CoefficientFn::constant(mat({{0.0}}));
  model.factor.Lambda = CoefficientFn::constant(mat({{0.3, 0.0}}));
  model.assets.m = 1;
  model.assets.a0 = CoefficientFn::constant(mat({{0.0}}));
  model.assets.a = CoefficientFn::constant(mat({{0.0}}));
  model.assets.Sigma = CoefficientFn::constant(mat({{0.0, 0.2}}));
  model.theta = theta;
  model.T = T;
  return model;
}

MarketModel constant_rate(double c, double theta, double T) {
  MarketModel model = zero_market(theta, T);
  model.assets.a0 = CoefficientFn::constant(mat({{c}}));
  model.assets.a = CoefficientFn::constant(mat({{c}}));
  return model;
}

MarketModel lgq_model() {
  MarketModel model;
  model.factor.n = 1;
  model.factor.b = saturated_scalar(0.0, -0.5, 10.0);
  model.factor.Lambda = CoefficientFn::constant(mat({{0.3, 0.0}}));
  model.assets.m = 1;
  model.assets.a0 = saturated_scalar(0.02, 0.01, 1.0);
  // a = a0 + a_hat = 0.06 + 0.11 x
  model.assets.a = saturated_scalar(0.06, 0.11, 5.0);
  model.assets.Sigma = CoefficientFn::constant(mat({{0.1, 0.2}}));
  model.constraints.Upsilon = mat({{1.0, -1.0}});
  model.constraints.upsilon = vec({50.0, 50.0});
  model.theta = 0.5;
  model.T = 1.0;
  return model;
}

MarketModel jump_model() {
  MarketModel model = lgq_model();
  model.nu.atoms.push_back(JumpAtom::factor(1.0, CoefficientFn::constant(mat({{0.1}})), 1));
  model.nu.atoms.push_back(JumpAtom::asset(0.5, vec({-0.3})));
  model.nu.atoms.push_back(JumpAtom::asset(0.5, vec({0.2})));
  return model;
}

MarketModel constrained_model() {
  MarketModel model = lgq_model();
  model.constraints.Upsilon = mat({{1.0}});
  model.constraints.upsilon = vec({0.5});
  return model;
}

MarketModel two_factor_model() {
  MarketModel model;
  model.factor.n = 2;
  model.factor.b = CoefficientFn::affine_saturated(mat({{0.0}, {0.0}}), mat({{-0.5, 0.0}, {0.1, -0.4}}),
                                                   vec({0.0, 0.0}), vec({-10.0, -10.0}), vec({10.0, 10.0}));
  model.factor.Lambda = CoefficientFn::constant(mat({{0.3, 0.0, 0.0}, {0.05, 0.25, 0.0}}));
  model.assets.m = 1;
  model.assets.a0 = CoefficientFn::affine_saturated(mat({{0.02}}), mat({{0.01, 0.0}}), vec({0.0}), vec({-1.0}),
                                                    vec({1.0}));
  model.assets.a = CoefficientFn::affine_saturated(mat({{0.06}}), mat({{0.11, 0.05}}), vec({0.0}), vec({-5.0}),
                                                   vec({5.0}));
  model.assets.Sigma = CoefficientFn::constant(mat({{0.1, -0.05, 0.2}}));
  model.nu.atoms.push_back(JumpAtom::factor(0.5, CoefficientFn::constant(mat({{0.1}, {-0.1}})), 1));
  model.nu.atoms.push_back(JumpAtom::asset(0.3, vec({-0.3})));
  model.constraints.Upsilon = mat({{1.0, -1.0}});
  model.constraints.upsilon = vec({50.0, 50.0});
  model.theta = 0.5;
  model.T = 1.0;
  return model;
}

Lattice default_lattice(const MarketModel& model, int nodes, int time_steps, double half_width) {
  const Eigen::Index n = model.n();
  return Lattice(Eigen::VectorXd::Constant(n, -half_width), Eigen::VectorXd::Constant(n, half_width),
                 std::vector<int>(static_cast<std::size_t>(n), nodes), time_steps, model.T);
}

std::vector<NamedModel> solver_test_models() {
  const Eigen::VectorXd lo1 = Eigen::VectorXd::Constant(1, -1.5);
  const Eigen::VectorXd hi1 = Eigen::VectorXd::Constant(1, 1.5);
  const Eigen::VectorXd lo2 = Eigen::VectorXd::Constant(2, -1.5);
  const Eigen::VectorXd hi2 = Eigen::VectorXd::Constant(2, 1.5);
  return {
      {"zero_market", zero_market(), lo1, hi1},
      {"constant_rate", constant_rate(0.03), lo1, hi1},
      {"lgq", lgq_model(), lo1, hi1},
      {"jumps", jump_model(), lo1, hi1},
      {"constrained", constrained_model(), lo1, hi1},
      {"two_factor", two_factor_model(), lo2, hi2},
  };
}

}  // namespace riskhjb::testing
