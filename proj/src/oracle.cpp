#include "riskhjb/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace riskhjb {

namespace {

// Base value and state slope of an affine coefficient, checking that time
// does not enter and that saturation caps do not bind on the box.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> affine_parts(const CoefficientFn& fn, Eigen::Index n,
                                                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                                         const char* name) {
  Eigen::MatrixXd slope = Eigen::MatrixXd::Zero(fn.size(), n);
  if (fn.family() == CoefficientFamily::Constant) return {fn.base(), slope};
  if ((fn.time_slope().array() != 0.0).any())
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " depends on time; not a linear-Gaussian model");
  if (fn.state_dim() == n) slope = fn.state_slope();
  if (fn.family() == CoefficientFamily::AffineSaturated) {
    const unsigned corners = 1u << static_cast<unsigned>(n);
    for (unsigned c = 0; c < corners; ++c) {
      Eigen::VectorXd x(n);
      for (Eigen::Index i = 0; i < n; ++i) x(i) = (c >> i) & 1u ? hi(i) : lo(i);
      const Eigen::VectorXd raw = fn.base() + slope * x;
      if ((raw.array() < fn.lower().array()).any() || (raw.array() > fn.upper().array()).any())
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " saturates inside the box");
    }
  }
  return {fn.base(), slope};
}

struct RiccatiState {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  double k = 0.0;
};

struct RiccatiRhs {
  const LGQSpec& spec;
  Eigen::MatrixXd LL;     // Lambda Lambda'
  Eigen::MatrixXd Gamma;  // theta Sigma Lambda'
  Eigen::LLT<Eigen::MatrixXd> S;  // (theta + 1) Sigma Sigma'

  explicit RiccatiRhs(const LGQSpec& s)
      : spec(s),
        LL(s.Lambda * s.Lambda.transpose()),
        Gamma(s.theta * s.Sigma * s.Lambda.transpose()),
        S((s.theta + 1.0) * s.Sigma * s.Sigma.transpose()) {
    if (S.info() != Eigen::Success)
      throw Error(ErrorCode::EllipticityViolation, "Sigma Sigma' is not positive definite");
  }

  RiccatiState operator()(const RiccatiState& y) const {
    const double th = spec.theta;
    const Eigen::MatrixXd W = spec.A - Gamma * y.Q;
    const Eigen::VectorXd w0 = spec.a_hat0 - Gamma * y.q;
    const Eigen::MatrixXd SW = S.solve(W);
    const Eigen::VectorXd Sw0 = S.solve(w0);
    RiccatiState d;
    d.Q = -(spec.B.transpose() * y.Q + y.Q * spec.B) + th * y.Q * LL * y.Q - W.transpose() * SW;
    d.Q = 0.5 * (d.Q + d.Q.transpose());
    d.q = -y.Q * spec.b0 - spec.B.transpose() * y.q + th * y.Q * LL * y.q - spec.c1 - W.transpose() * Sw0;
    d.k = -(spec.b0.dot(y.q) + 0.5 * (LL * y.Q).trace() - 0.5 * th * y.q.dot(LL * y.q) + spec.c0 +
            0.5 * w0.dot(Sw0));
    return d;
  }
};

RiccatiState axpy(const RiccatiState& y, double h, const RiccatiState& d) {
  return {y.Q + h * d.Q, y.q + h * d.q, y.k + h * d.k};
}

}  // namespace

LGQSpec lgq_from_model(const MarketModel& model, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  check_dimensions(model);
  if (!model.nu.atoms.empty()) throw Error(ErrorCode::InvalidArgument, "linear-Gaussian oracle needs a model without jumps");
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  if (model.factor.Lambda.lipschitz_constant() != 0.0 || model.assets.Sigma.lipschitz_constant() != 0.0)
    throw Error(ErrorCode::InvalidArgument, "linear-Gaussian oracle needs constant Lambda and Sigma");
  LGQSpec spec;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  spec.Lambda = model.factor.Lambda(0.0, zero);
  spec.Sigma = model.assets.Sigma(0.0, zero);
  auto [b0, B] = affine_parts(model.factor.b, n, lo, hi, "b");
  auto [c0, c1] = affine_parts(model.assets.a0, n, lo, hi, "a0");
  auto [a0v, Aa] = affine_parts(model.assets.a, n, lo, hi, "a");
  spec.b0 = b0;
  spec.B = B;
  spec.c0 = c0(0);
  spec.c1 = c1.row(0).transpose();
  spec.a_hat0 = a0v - Eigen::VectorXd::Constant(m, spec.c0);
  spec.A = Aa - Eigen::VectorXd::Ones(m) * spec.c1.transpose();
  spec.theta = model.theta;
  spec.T = model.T;
  return spec;
}

MarketModel lgq_to_model(const LGQSpec& spec, double bound) {
  const Eigen::Index n = spec.n();
  const Eigen::Index m = spec.m();
  MarketModel model;
  model.factor.n = n;
  model.assets.m = m;
  model.factor.b = CoefficientFn::affine(spec.b0, spec.B);
  model.factor.Lambda = CoefficientFn::constant(spec.Lambda);
  model.assets.a0 = CoefficientFn::affine(Eigen::MatrixXd::Constant(1, 1, spec.c0), spec.c1.transpose());
  model.assets.a = CoefficientFn::affine(spec.a_hat0 + Eigen::VectorXd::Constant(m, spec.c0),
                                         spec.A + Eigen::VectorXd::Ones(m) * spec.c1.transpose());
  model.assets.Sigma = CoefficientFn::constant(spec.Sigma);
  model.constraints.Upsilon.resize(m, 2 * m);
  model.constraints.Upsilon << Eigen::MatrixXd::Identity(m, m), -Eigen::MatrixXd::Identity(m, m);
  model.constraints.upsilon = Eigen::VectorXd::Constant(2 * m, bound);
  model.theta = spec.theta;
  model.T = spec.T;
  return model;
}

double RiccatiSolution::value(int i, const Eigen::VectorXd& x) const {
  const auto s = static_cast<std::size_t>(i);
  return 0.5 * x.dot(Q[s] * x) + q[s].dot(x) + k[s];
}

Eigen::VectorXd RiccatiSolution::gradient(int i, const Eigen::VectorXd& x) const {
  const auto s = static_cast<std::size_t>(i);
  return Q[s] * x + q[s];
}

double RiccatiSolution::value_at(double t, const Eigen::VectorXd& x) const {
  const int N = static_cast<int>(times.size()) - 1;
  const double T = times.back();
  const double s = std::clamp(t / T, 0.0, 1.0) * N;
  const int i = std::min(static_cast<int>(std::floor(s)), N - 1);
  const double w = s - i;
  return (1.0 - w) * value(i, x) + w * value(i + 1, x);
}

Eigen::VectorXd RiccatiSolution::policy(const LGQSpec& spec, int i, const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd S = (spec.theta + 1.0) * spec.Sigma * spec.Sigma.transpose();
  const Eigen::VectorXd a_hat = spec.a_hat0 + spec.A * x;
  return S.llt().solve(a_hat - spec.theta * spec.Sigma * spec.Lambda.transpose() * gradient(i, x));
}

RiccatiSolution riccati_solve(const LGQSpec& spec, int ode_steps) {
  if (ode_steps < 4) throw Error(ErrorCode::InvalidArgument, "need at least 4 ODE steps");
  const Eigen::Index n = spec.n();
  const RiccatiRhs rhs(spec);
  RiccatiSolution sol;
  const auto N = static_cast<std::size_t>(ode_steps);
  sol.times.resize(N + 1);
  sol.Q.resize(N + 1);
  sol.q.resize(N + 1);
  sol.k.resize(N + 1);
  for (std::size_t i = 0; i <= N; ++i) sol.times[i] = i == N ? spec.T : spec.T * static_cast<double>(i) / ode_steps;

  RiccatiState y{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0};
  sol.Q[N] = y.Q;
  sol.q[N] = y.q;
  sol.k[N] = y.k;
  const double h = -spec.T / ode_steps;
  for (std::size_t i = N; i-- > 0;) {
    const RiccatiState k1 = rhs(y);
    const RiccatiState k2 = rhs(axpy(y, 0.5 * h, k1));
    const RiccatiState k3 = rhs(axpy(y, 0.5 * h, k2));
    const RiccatiState k4 = rhs(axpy(y, h, k3));
    y.Q += h / 6.0 * (k1.Q + 2.0 * k2.Q + 2.0 * k3.Q + k4.Q);
    y.q += h / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    y.k += h / 6.0 * (k1.k + 2.0 * k2.k + 2.0 * k3.k + k4.k);
    if (!y.Q.allFinite() || !y.q.allFinite() || !std::isfinite(y.k) || y.Q.cwiseAbs().maxCoeff() > 1e12) {
      std::ostringstream os;
      os << "Riccati solution escapes near t = " << sol.times[i];
      throw Error(ErrorCode::BlowUp, os.str());
    }
    sol.Q[i] = y.Q;
    sol.q[i] = y.q;
    sol.k[i] = y.k;
  }
  return sol;
}

double verify_ansatz(const LGQSpec& spec, const RiccatiSolution& solution,
                     const std::vector<std::pair<double, Eigen::VectorXd>>& probes) {
  const int N = static_cast<int>(solution.times.size()) - 1;
  if (N < 4) throw Error(ErrorCode::InvalidArgument, "need at least 5 samples");
  const double dt = solution.times[1] - solution.times[0];
  const MarketModel model = lgq_to_model(spec);
  const Eigen::MatrixXd S = (spec.theta + 1.0) * spec.Sigma * spec.Sigma.transpose();
  const Eigen::LLT<Eigen::MatrixXd> S_llt(S);
  double worst = 0.0;
  LocalCoefficients c;
  for (const auto& [t, x] : probes) {
    const int i = std::clamp(static_cast<int>(std::lround(t / dt)), 0, N);
    auto phi = [&](int j) { return solution.value(j, x); };
    double phi_t;
    if (i >= 2 && i <= N - 2) {
      phi_t = (-phi(i + 2) + 8.0 * phi(i + 1) - 8.0 * phi(i - 1) + phi(i - 2)) / (12.0 * dt);
    } else if (i < 2) {
      phi_t = (-25.0 * phi(i) + 48.0 * phi(i + 1) - 36.0 * phi(i + 2) + 16.0 * phi(i + 3) - 3.0 * phi(i + 4)) /
              (12.0 * dt);
    } else {
      phi_t = (25.0 * phi(i) - 48.0 * phi(i - 1) + 36.0 * phi(i - 2) - 16.0 * phi(i - 3) + 3.0 * phi(i - 4)) /
              (12.0 * dt);
    }
    const Eigen::VectorXd p = solution.gradient(i, x);
    const Eigen::MatrixXd& D2 = solution.Q[static_cast<std::size_t>(i)];
    c.assign(model, solution.times[static_cast<std::size_t>(i)], x);
    const Eigen::VectorXd h = S_llt.solve(c.a_hat - spec.theta * c.sigma_lambda * p);
    const double L = f(c, h).dot(p) + 0.5 * (c.lambda_lambda * D2).trace() -
                     0.5 * spec.theta * p.dot(c.lambda_lambda * p) - g(c, h);
    worst = std::max(worst, std::abs(phi_t + L));
  }
  return worst;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> brute_force_box(const MarketModel& model, double fallback_radius) {
  const Eigen::Index m = model.m();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(m, -fallback_radius);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(m, fallback_radius);
  auto single_axis = [&](const Eigen::VectorXd& row, Eigen::Index& axis) {
    axis = -1;
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      if (row(i) == 0.0) continue;
      if (axis >= 0) return false;
      axis = i;
    }
    return axis >= 0;
  };
  const auto& cs = model.constraints;
  for (Eigen::Index r = 0; r < cs.Upsilon.cols(); ++r) {
    Eigen::Index i;
    if (!single_axis(cs.Upsilon.col(r), i)) continue;
    const double a = cs.Upsilon(i, r);
    if (a > 0.0) {
      hi(i) = std::min(hi(i), cs.upsilon(r) / a);
    } else {
      lo(i) = std::max(lo(i), cs.upsilon(r) / a);
    }
  }
  for (const auto& atom : model.nu.atoms) {
    if (!atom.moves_assets()) continue;
    Eigen::Index i;
    if (!single_axis(atom.gamma, i)) continue;
    if (atom.gamma(i) < 0.0) {
      hi(i) = std::min(hi(i), -1.0 / atom.gamma(i));
    } else {
      lo(i) = std::max(lo(i), -1.0 / atom.gamma(i));
    }
  }
  return {lo, hi};
}

Eigen::VectorXd brute_force_argmin(const HamiltonianInputs& inputs, const MarketModel& model, int grid_density,
                                   double fallback_radius) {
  const Eigen::Index m = model.m();
  if (m > 2) throw Error(ErrorCode::InvalidArgument, "brute-force search supports m <= 2");
  if (grid_density < 2) throw Error(ErrorCode::InvalidArgument, "grid density must be at least 2");
  const auto [lo, hi] = brute_force_box(model, fallback_radius);
  if ((lo.array() > hi.array()).any()) throw Error(ErrorCode::InfeasibleProblem, "search box is empty");
  const LocalCoefficients c(model, inputs.t, inputs.x);

  std::vector<int> counts(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) counts[static_cast<std::size_t>(i)] = hi(i) > lo(i) ? grid_density : 1;
  const int total = m == 1 ? counts[0] : counts[0] * counts[1];

  Eigen::VectorXd h(m);
  Eigen::VectorXd best_h;
  double best = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < total; ++idx) {
    int rest = idx;
    for (Eigen::Index i = 0; i < m; ++i) {
      const int N = counts[static_cast<std::size_t>(i)];
      const int j = rest % N;
      rest /= N;
      h(i) = N == 1 ? lo(i) : lo(i) + (hi(i) - lo(i)) * j / (N - 1.0);
    }
    if (!feasible_region_membership(model, h, inputs.t)) continue;
    const double v = hamiltonian_objective(c, h, inputs.r, inputs.p);
    if (v < best) {
      best = v;
      best_h = h;
    }
  }
  if (!std::isfinite(best)) throw Error(ErrorCode::InfeasibleProblem, "no grid point is feasible");
  return best_h;
}

nlohmann::json riccati_to_json(const RiccatiSolution& solution, const std::vector<double>& times) {
  nlohmann::json out = nlohmann::json::array();
  const int N = static_cast<int>(solution.times.size()) - 1;
  const double T = solution.times.back();
  for (double t : times) {
    const double s = std::clamp(t / T, 0.0, 1.0) * N;
    const int i = std::min(static_cast<int>(std::floor(s)), N - 1);
    const double w = s - i;
    const auto a = static_cast<std::size_t>(i);
    const Eigen::MatrixXd Q = (1.0 - w) * solution.Q[a] + w * solution.Q[a + 1];
    const Eigen::VectorXd q = (1.0 - w) * solution.q[a] + w * solution.q[a + 1];
    const double k = (1.0 - w) * solution.k[a] + w * solution.k[a + 1];
    nlohmann::json row;
    row["t"] = t;
    std::vector<std::vector<double>> Qrows;
    for (Eigen::Index r = 0; r < Q.rows(); ++r) {
      std::vector<double> row_values;
      for (Eigen::Index col = 0; col < Q.cols(); ++col) row_values.push_back(Q(r, col));
      Qrows.push_back(row_values);
    }
    row["Q"] = Qrows;
    row["q"] = std::vector<double>(q.data(), q.data() + q.size());
    row["k"] = k;
    out.push_back(row);
  }
  return out;
}

}  // namespace riskhjb
