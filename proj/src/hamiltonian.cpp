#include "riskhjb/hamiltonian.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace riskhjb {

namespace {

double quad_form(const Eigen::MatrixXd& A, const Eigen::Ref<const Eigen::VectorXd>& h) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < A.cols(); ++j) row += A(i, j) * h(j);
    s += h(i) * row;
  }
  return s;
}

double jump_base(const Eigen::VectorXd& gamma, const Eigen::Ref<const Eigen::VectorXd>& h) {
  const double base = 1.0 + h.dot(gamma);
  if (!(base > 0.0)) {
    std::ostringstream os;
    os << "1 + h'gamma = " << base << " <= 0";
    throw Error(ErrorCode::InfeasibleControl, os.str());
  }
  return base;
}

}  // namespace

double g(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h) {
  const double theta = c.theta;
  double value = 0.5 * (theta + 1.0) * quad_form(c.sigma_sigma, h) - c.a0 - h.dot(c.a_hat);
  for (std::size_t j = 0; j < c.gamma.size(); ++j) {
    const double hg = h.dot(c.gamma[j]);
    if (hg == 0.0) continue;
    const double base = jump_base(c.gamma[j], h);
    value += c.intensity(static_cast<Eigen::Index>(j)) * ((std::pow(base, -theta) - 1.0) / theta + hg);
  }
  return value;
}

double g(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& h, const MarketModel& model) {
  return g(LocalCoefficients(model, t, x), h);
}

Eigen::VectorXd f(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h) {
  Eigen::VectorXd out = c.b - c.theta * (c.sigma_lambda.transpose() * h);
  for (std::size_t j = 0; j < c.gamma.size(); ++j) {
    const double hg = h.dot(c.gamma[j]);
    if (hg == 0.0) continue;
    const double base = jump_base(c.gamma[j], h);
    out += c.intensity(static_cast<Eigen::Index>(j)) * (std::pow(base, -c.theta) - 1.0) * c.xi[j];
  }
  return out;
}

Eigen::VectorXd f(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& h, const MarketModel& model) {
  return f(LocalCoefficients(model, t, x), h);
}

Eigen::VectorXd f_a(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h) {
  return f(c, h) - c.xi_compensator;
}

Eigen::VectorXd f_a(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& h, const MarketModel& model) {
  return f_a(LocalCoefficients(model, t, x), h);
}

double ell(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h,
           const Eigen::Ref<const Eigen::VectorXd>& p) {
  const double theta = c.theta;
  double value = 0.5 * (theta + 1.0) * quad_form(c.sigma_sigma, h) +
                 theta * h.dot(c.sigma_lambda * p) - h.dot(c.a_hat);
  for (std::size_t j = 0; j < c.gamma.size(); ++j) {
    const double hg = h.dot(c.gamma[j]);
    if (hg == 0.0) continue;
    const double base = jump_base(c.gamma[j], h);
    const double lam = c.intensity(static_cast<Eigen::Index>(j));
    value += lam / theta * ((1.0 - theta * c.xi[j].dot(p)) * (std::pow(base, -theta) - 1.0) + theta * hg);
  }
  return value;
}

double ell(const Eigen::VectorXd& h, const HamiltonianInputs& inputs, const MarketModel& model) {
  return ell(LocalCoefficients(model, inputs.t, inputs.x), h, inputs.p);
}

// ---------------------------------------------------------------- EllObjective

EllObjective::EllObjective(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& p)
    : theta_(c.theta) {
  quad_ = (theta_ + 1.0) * c.sigma_sigma;
  linear_ = theta_ * (c.sigma_lambda * p) - c.a_hat;
  for (std::size_t j = 0; j < c.gamma.size(); ++j) {
    if ((c.gamma[j].array() == 0.0).all()) continue;
    const double lam = c.intensity(static_cast<Eigen::Index>(j));
    linear_ += lam * c.gamma[j];
    gamma_.push_back(c.gamma[j]);
    weight_.push_back(lam * (1.0 - theta_ * c.xi[j].dot(p)));
  }
}

bool EllObjective::in_domain(const Eigen::VectorXd& h) const {
  for (const auto& gam : gamma_)
    if (!(1.0 + h.dot(gam) > 0.0)) return false;
  return true;
}

double EllObjective::value(const Eigen::VectorXd& h) const {
  double v = 0.5 * quad_form(quad_, h) + linear_.dot(h);
  for (std::size_t j = 0; j < gamma_.size(); ++j) {
    const double base = 1.0 + h.dot(gamma_[j]);
    if (!(base > 0.0)) return std::numeric_limits<double>::infinity();
    v += weight_[j] / theta_ * (std::pow(base, -theta_) - 1.0);
  }
  return v;
}

void EllObjective::gradient_hessian(const Eigen::VectorXd& h, Eigen::VectorXd& grad,
                                    Eigen::MatrixXd& hess) const {
  grad.noalias() = quad_ * h;
  grad += linear_;
  hess = quad_;
  for (std::size_t j = 0; j < gamma_.size(); ++j) {
    const double base = 1.0 + h.dot(gamma_[j]);
    const double p1 = std::pow(base, -theta_ - 1.0);
    grad -= weight_[j] * p1 * gamma_[j];
    hess.noalias() += weight_[j] * (theta_ + 1.0) * (p1 / base) * (gamma_[j] * gamma_[j].transpose());
  }
}

double EllObjective::domain_step_limit(const Eigen::VectorXd& h, const Eigen::VectorXd& d) const {
  double limit = std::numeric_limits<double>::infinity();
  for (const auto& gam : gamma_) {
    const double gd = gam.dot(d);
    if (gd < 0.0) limit = std::min(limit, (1.0 + h.dot(gam)) / -gd);
  }
  return limit;
}

// ---------------------------------------------------------------- minimisation

MinimizerResult minimize_ell(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& p,
                             const MarketModel& model, const MinimizerOptions& options,
                             const Eigen::MatrixXd& extra_A, const Eigen::VectorXd& extra_b,
                             const Eigen::VectorXd* start_hint) {
  const Eigen::Index m = model.m();
  const auto& cs = model.constraints;
  const Eigen::Index r = cs.Upsilon.cols();
  const Eigen::Index extra = extra_A.rows();

  Eigen::MatrixXd A(r + extra, m);
  Eigen::VectorXd bvec(r + extra);
  if (r > 0) {
    A.topRows(r) = cs.Upsilon.transpose();
    bvec.head(r) = cs.upsilon;
  }
  if (extra > 0) {
    A.bottomRows(extra) = extra_A;
    bvec.tail(extra) = extra_b;
  }

  const EllObjective objective(c, p);

  auto usable = [&](const Eigen::VectorXd& h) {
    if (h.size() != m || !h.allFinite()) return false;
    if (A.rows() > 0 && ((A * h - bvec).array() > 0.0).any()) return false;
    for (const auto& gam : c.gamma)
      if (!(1.0 + h.dot(gam) > 1e-10)) return false;
    return true;
  };

  Eigen::VectorXd start;
  if (start_hint && usable(*start_hint)) {
    start = *start_hint;
  } else if (usable(Eigen::VectorXd::Zero(m))) {
    start = Eigen::VectorXd::Zero(m);
  } else {
    // Phase one over the polytope and the jump half-spaces -gamma' h <= 1.
    std::vector<Eigen::VectorXd> jump_rows;
    for (const auto& gam : c.gamma)
      if ((gam.array() != 0.0).any()) jump_rows.push_back(gam);
    Eigen::MatrixXd A1(A.rows() + static_cast<Eigen::Index>(jump_rows.size()), m);
    Eigen::VectorXd b1(A1.rows());
    A1.topRows(A.rows()) = A;
    b1.head(A.rows()) = bvec;
    for (std::size_t j = 0; j < jump_rows.size(); ++j) {
      A1.row(A.rows() + static_cast<Eigen::Index>(j)) = -jump_rows[j].transpose();
      b1(A.rows() + static_cast<Eigen::Index>(j)) = 1.0;
    }
    const InteriorPoint ip = find_interior_point(A1, b1);
    if (ip.margin < -1e-9) throw Error(ErrorCode::InfeasibleProblem, "feasible region J is empty");
    start = ip.point;
  }

  const ConstrainedMinimum sol = minimize_convex(objective, A, bvec, start, options.tol, options.max_iter);
  if (!sol.converged) {
    std::ostringstream os;
    os << "KKT residual " << sol.kkt_residual << " after " << sol.iterations << " iterations";
    throw Error(ErrorCode::NonConvergence, os.str());
  }

  MinimizerResult out;
  out.h_star = sol.h;
  out.objective = sol.value;
  out.kkt_residual = sol.kkt_residual;
  out.active_set = sol.active_set;
  out.iterations = sol.iterations;
  out.jump_margin = 1.0;
  for (const auto& gam : c.gamma)
    if ((gam.array() != 0.0).any()) out.jump_margin = std::min(out.jump_margin, 1.0 + sol.h.dot(gam));
  return out;
}

double hamiltonian_objective(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h,
                             double r, const Eigen::Ref<const Eigen::VectorXd>& p) {
  return f_a(c, h).dot(p) + c.theta * g(c, h) * r;
}

MinimizerResult minimize_hamiltonian(const HamiltonianInputs& inputs, const MarketModel& model,
                                     const MinimizerOptions& options) {
  if (!(inputs.r > 0.0)) throw Error(ErrorCode::InvalidArgument, "Hamiltonian needs r > 0");
  if (options.tol <= 0.0) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  const LocalCoefficients c(model, inputs.t, inputs.x);
  // With p the gradient of u = exp(-theta Phi), the risk-sensitive gradient is -p / (theta r).
  const Eigen::VectorXd p_phi = -inputs.p / (model.theta * inputs.r);
  MinimizerResult res = minimize_ell(c, p_phi, model, options);
  res.objective = hamiltonian_objective(c, res.h_star, inputs.r, inputs.p);
  return res;
}

double H_a(const HamiltonianInputs& inputs, const MarketModel& model, const MinimizerOptions& options) {
  return minimize_hamiltonian(inputs, model, options).objective;
}

double H(const HamiltonianInputs& inputs, const MarketModel& model, const MinimizerOptions& options) {
  const LocalCoefficients c(model, inputs.t, inputs.x);
  return H_a(inputs, model, options) + c.xi_compensator.dot(inputs.p);
}

}  // namespace riskhjb
