#include "riskhjb/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

namespace riskhjb {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

double discrete_objective(const LocalCoefficients& c, const Eigen::VectorXd& h, double r,
                          const Eigen::VectorXd& qplus, const Eigen::VectorXd& qminus) {
  const Eigen::VectorXd fa = f_a(c, h);
  double v = c.theta * g(c, h) * r;
  for (Eigen::Index a = 0; a < fa.size(); ++a) v += fa(a) >= 0.0 ? fa(a) * qplus(a) : fa(a) * qminus(a);
  return v;
}

struct NodeMinimum {
  Eigen::VectorXd h;
  double value = std::numeric_limits<double>::infinity();
  double kkt = 0.0;
  double margin = 1.0;
};

// Exact minimiser over J of the upwinded discrete Hamiltonian
//   sum_a [max(fa_a, 0) q+_a + min(fa_a, 0) q-_a] + theta g(h) r.
// On axes with q+ < q- the term is a pointwise min over the two one-sided
// choices, so those choices are enumerated. On axes with q+ > q- it is a max;
// the max of the two convex pieces is minimised by the piece whose
// unconstrained minimiser lands on its own side, or else over the sign cells.
NodeMinimum minimize_node(const LocalCoefficients& c, const MarketModel& model, double r,
                          const Eigen::VectorXd& qplus, const Eigen::VectorXd& qminus,
                          const Eigen::VectorXd& hint, const MinimizerOptions& options) {
  const Eigen::Index n = qplus.size();
  const Eigen::Index m = model.m();
  std::vector<Eigen::Index> concave;
  std::vector<Eigen::Index> convex;
  for (Eigen::Index a = 0; a < n; ++a) {
    if (qplus(a) < qminus(a)) concave.push_back(a);
    if (qplus(a) > qminus(a)) convex.push_back(a);
  }
  const Eigen::VectorXd c_drift = c.b - c.xi_compensator;
  const double scale = -1.0 / (c.theta * r);

  NodeMinimum best;
  auto consider = [&](const MinimizerResult& res) {
    const double v = discrete_objective(c, res.h_star, r, qplus, qminus);
    if (v < best.value) {
      best.value = v;
      best.h = res.h_star;
      best.kkt = res.kkt_residual;
      best.margin = res.jump_margin;
    }
  };

  const int n_concave = static_cast<int>(concave.size());
  const int n_convex = static_cast<int>(convex.size());
  Eigen::VectorXd q = qplus;
  for (int sigma = 0; sigma < (1 << n_concave); ++sigma) {
    for (int i = 0; i < n_concave; ++i) {
      const Eigen::Index a = concave[static_cast<std::size_t>(i)];
      q(a) = (sigma >> i) & 1 ? qminus(a) : qplus(a);
    }
    bool matched = false;
    for (int tau = 0; tau < (1 << n_convex) && !matched; ++tau) {
      for (int i = 0; i < n_convex; ++i) {
        const Eigen::Index a = convex[static_cast<std::size_t>(i)];
        q(a) = (tau >> i) & 1 ? qminus(a) : qplus(a);
      }
      const MinimizerResult res = minimize_ell(c, scale * q, model, options, Eigen::MatrixXd(), Eigen::VectorXd(), &hint);
      const Eigen::VectorXd fa = f_a(c, res.h_star);
      matched = true;
      for (int i = 0; i < n_convex; ++i) {
        const Eigen::Index a = convex[static_cast<std::size_t>(i)];
        const bool minus = (tau >> i) & 1;
        if (minus ? fa(a) > 0.0 : fa(a) < 0.0) matched = false;
      }
      if (matched) consider(res);
    }
    if (matched) continue;

    for (int tau = 0; tau < (1 << n_convex); ++tau) {
      Eigen::MatrixXd rows(n_convex, m);
      Eigen::VectorXd rhs(n_convex);
      Eigen::Index used = 0;
      bool empty = false;
      for (int i = 0; i < n_convex; ++i) {
        const Eigen::Index a = convex[static_cast<std::size_t>(i)];
        const double s = (tau >> i) & 1 ? -1.0 : 1.0;
        q(a) = s > 0 ? qplus(a) : qminus(a);
        // s fa_a >= 0  <=>  s theta (Lambda Sigma')_a h <= s (b - sum lambda xi)_a
        const Eigen::VectorXd row = s * c.theta * c.sigma_lambda.col(a);
        if (row.norm() <= 1e-14) {
          if (s * c_drift(a) < 0.0) empty = true;
          continue;
        }
        rows.row(used) = row.transpose();
        rhs(used) = s * c_drift(a);
        ++used;
      }
      if (empty) continue;
      try {
        const MinimizerResult res =
            minimize_ell(c, scale * q, model, options, rows.topRows(used), rhs.head(used), &hint);
        consider(res);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InfeasibleProblem) throw;
      }
    }
  }
  if (!std::isfinite(best.value)) throw Error(ErrorCode::InfeasibleProblem, "no feasible control at node");
  (void)m;
  return best;
}

class Discretization {
 public:
  Discretization(const MarketModel& model, const Lattice& lattice, const PolicyIterationConfig& config,
                 SolveReport& report)
      : model_(model), lattice_(lattice), config_(config), report_(report), locals_(lattice.size()) {
    if (lattice.n() != model.n())
      throw Error(ErrorCode::DimensionMismatch, "lattice dimension differs from the factor dimension");
    if (std::abs(lattice.T() - model.T) > 1e-12 * model.T)
      throw Error(ErrorCode::DimensionMismatch, "lattice horizon differs from the model horizon");
    time_dependent_jumps_ = false;
    for (const auto& atom : model.nu.atoms)
      if (atom.moves_factors() && atom.xi.family() != CoefficientFamily::Constant) time_dependent_jumps_ = true;
    intensity_ = model.nu.total_intensity();
    report_.short_rate_bound = short_rate_bound(model, lattice.lower(), lattice.upper());
  }

  int size() const { return lattice_.size(); }

  void set_level(int k) {
    if (k == level_) return;
    const double t = lattice_.time(k);
    for (int node = 0; node < size(); ++node) locals_[static_cast<std::size_t>(node)].assign(model_, t, lattice_.point(node));
    level_ = k;
  }

  const SpMat& jump(int k) {
    if (!time_dependent_jumps_ && jump_cached_) return jump_;
    if (time_dependent_jumps_ && jump_level_ == k) return jump_;
    jump_ = jump_operator(lattice_.time(k), model_, lattice_, &report_.grid);
    jump_level_ = k;
    jump_cached_ = true;
    return jump_;
  }

  /// I - dt (L^h + theta g^h) at the current level.
  SpMat assemble(const Eigen::MatrixXd& H) {
    const int N = size();
    const int n = lattice_.n();
    const double dt = lattice_.dt();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(N) * (2 * n + 1 + (n == 2 ? 4 : 0)));
    double sup_g = 0.0;
    for (int node = 0; node < N; ++node) {
      const LocalCoefficients& c = locals_[static_cast<std::size_t>(node)];
      const Eigen::VectorXd h = H.col(node);
      const Eigen::VectorXd fa = f_a(c, h);
      const double gv = g(c, h);
      sup_g = std::max(sup_g, std::abs(gv));
      double diag = 1.0 - dt * c.theta * gv;
      auto add = [&](int col, double w) {
        trip.emplace_back(node, col, -dt * w);
        diag += dt * w;
      };
      const auto idx = lattice_.multi_index(node);
      bool interior = true;
      for (int a = 0; a < n; ++a) {
        const int stride = a == 0 ? 1 : lattice_.nodes(0);
        const int i = idx[static_cast<std::size_t>(a)];
        const int last = lattice_.nodes(a) - 1;
        const double hx = lattice_.dx(a);
        if (i > 0 && i < last) {
          const double diff = 0.5 * c.lambda_lambda(a, a) / (hx * hx);
          add(node + stride, diff);
          add(node - stride, diff);
        } else {
          interior = false;
        }
        if (fa(a) >= 0.0) {
          if (i < last) add(node + stride, fa(a) / hx);
        } else {
          if (i > 0) add(node - stride, -fa(a) / hx);
        }
      }
      if (n == 2 && interior) {
        const double a01 = c.lambda_lambda(0, 1);
        if (a01 != 0.0) {
          const int s1 = lattice_.nodes(0);
          const double w = 0.5 * std::abs(a01) / (lattice_.dx(0) * lattice_.dx(1));
          // Seven-point stencil whose off-diagonal signs stay non-negative
          // while the axis diffusion dominates the cross term.
          const int pp = a01 > 0.0 ? node + 1 + s1 : node + 1 - s1;
          const int mm = a01 > 0.0 ? node - 1 - s1 : node - 1 + s1;
          add(pp, w);
          add(mm, w);
          add(node + 1, -w);
          add(node - 1, -w);
          add(node + s1, -w);
          add(node - s1, -w);
        }
      }
      trip.emplace_back(node, node, diag);
    }
    SpMat A(N, N);
    A.setFromTriplets(trip.begin(), trip.end());
    const double number = dt * (model_.theta * sup_g + intensity_);
    report_.stability_number = std::max(report_.stability_number, number);
    if (!(number < 1.0)) {
      std::ostringstream os;
      os << "dt (theta sup|g| + sum lambda) = " << number << " >= 1 at t = " << lattice_.time(level_);
      throw Error(ErrorCode::StabilityViolation, os.str());
    }
    for (int k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it)
        if ((it.row() == it.col() && !(it.value() > 0.0)) || (it.row() != it.col() && it.value() > 0.0))
          ++report_.m_matrix_violations;
    return A;
  }

  Eigen::VectorXd solve_level(const Eigen::MatrixXd& H, const Eigen::VectorXd& rhs) {
    const SpMat A = assemble(H);
    Eigen::SparseLU<SpMat> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "sparse factorisation failed");
    Eigen::VectorXd u = lu.solve(rhs);
    if (!u.allFinite()) throw Error(ErrorCode::NonConvergence, "sparse solve produced non-finite values");
    return u;
  }

  Eigen::VectorXd rhs(int k, const Eigen::VectorXd& u_next) {
    if (!has_factor_jumps()) return u_next;
    return u_next + lattice_.dt() * (jump(k + 1) * u_next);
  }

  bool has_factor_jumps() const {
    for (const auto& atom : model_.nu.atoms)
      if (atom.moves_factors()) return true;
    return false;
  }

  /// Policy improvement at the current level for the slice u.
  void improve(const Eigen::VectorXd& u, const Eigen::MatrixXd& H_prev, Eigen::MatrixXd& H_out) {
    const int N = size();
    const int n = lattice_.n();
    H_out.resize(model_.m(), N);
    Eigen::VectorXd qp(n);
    Eigen::VectorXd qm(n);
    for (int node = 0; node < N; ++node) {
      const auto idx = lattice_.multi_index(node);
      for (int a = 0; a < n; ++a) {
        const int stride = a == 0 ? 1 : lattice_.nodes(0);
        const int i = idx[static_cast<std::size_t>(a)];
        const double hx = lattice_.dx(a);
        qp(a) = i < lattice_.nodes(a) - 1 ? (u(node + stride) - u(node)) / hx : 0.0;
        qm(a) = i > 0 ? (u(node) - u(node - stride)) / hx : 0.0;
      }
      if (!(u(node) > 0.0)) {
        std::ostringstream os;
        os << "value " << u(node) << " <= 0 at node " << node;
        throw Error(ErrorCode::NonPositiveValue, os.str());
      }
      const NodeMinimum best = minimize_node(locals_[static_cast<std::size_t>(node)], model_, u(node), qp, qm,
                                             H_prev.col(node), config_.minimizer);
      H_out.col(node) = best.h;
      report_.max_kkt_residual = std::max(report_.max_kkt_residual, best.kkt);
      report_.min_jump_margin = std::min(report_.min_jump_margin, best.margin);
    }
  }

 private:
  const MarketModel& model_;
  const Lattice& lattice_;
  const PolicyIterationConfig& config_;
  SolveReport& report_;
  std::vector<LocalCoefficients> locals_;
  int level_ = -1;
  bool time_dependent_jumps_ = false;
  bool jump_cached_ = false;
  int jump_level_ = -1;
  SpMat jump_;
  double intensity_ = 0.0;
};

void check_policy_shape(const PolicyField& policy, const MarketModel& model, const Lattice& lattice) {
  if (policy.h.size() != static_cast<std::size_t>(lattice.time_steps()) + 1)
    throw Error(ErrorCode::DimensionMismatch, "policy field has the wrong number of time levels");
  for (const auto& hk : policy.h)
    if (hk.rows() != model.m() || hk.cols() != lattice.size())
      throw Error(ErrorCode::DimensionMismatch, "policy field level has the wrong shape");
}

// Bounds, feasibility and residual diagnostics of a finished solve.
void finish_report(SolveReport& report, const ValueField& value, const PolicyField& policy,
                   const MarketModel& model, const Lattice& lattice) {
  report.min_value = value.values.minCoeff();
  report.bound_violations = 0;
  report.max_value_over_bound = 0.0;
  for (int k = 0; k <= lattice.time_steps(); ++k) {
    const double bound = value_upper_bound(model, lattice, k);
    for (int node = 0; node < lattice.size(); ++node) {
      const double v = value.values(k, node);
      if (!(v > 0.0) || v > bound * (1.0 + 1e-12)) ++report.bound_violations;
      report.max_value_over_bound = std::max(report.max_value_over_bound, v / bound);
    }
  }
  report.infeasible_policy_nodes = 0;
  for (int k = 0; k <= lattice.time_steps(); ++k)
    for (int node = 0; node < lattice.size(); ++node)
      if (!feasible_region_membership(model, policy.h[static_cast<std::size_t>(k)].col(node), lattice.time(k)))
        ++report.infeasible_policy_nodes;

  const Eigen::MatrixXd res = pide_residual(value, policy, model, lattice);
  std::vector<double> core_abs;
  const auto core = lattice.interior_core();
  for (int k = 0; k < res.rows(); ++k)
    for (int node : core) core_abs.push_back(std::abs(res(k, node)));
  if (!core_abs.empty()) {
    report.residual_interior_max = *std::max_element(core_abs.begin(), core_abs.end());
    auto mid = core_abs.begin() + static_cast<std::ptrdiff_t>(core_abs.size() / 2);
    std::nth_element(core_abs.begin(), mid, core_abs.end());
    report.residual_interior_median = *mid;
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double value_upper_bound(const MarketModel& model, const Lattice& lattice, int k) {
  const double a0max = short_rate_bound(model, lattice.lower(), lattice.upper());
  return std::exp(model.theta * a0max * (model.T - lattice.time(k)));
}

ValueField evaluate_policy(const MarketModel& model, const Lattice& lattice, const PolicyField& policy,
                           SolveReport* report) {
  check_policy_shape(policy, model, lattice);
  SolveReport local_report;
  PolicyIterationConfig config;
  Discretization disc(model, lattice, config, report ? *report : local_report);
  ValueField out;
  out.values.resize(lattice.time_steps() + 1, lattice.size());
  out.values.row(lattice.time_steps()).setOnes();
  for (int k = lattice.time_steps() - 1; k >= 0; --k) {
    disc.set_level(k);
    const Eigen::VectorXd next = out.values.row(k + 1).transpose();
    out.values.row(k) = disc.solve_level(policy.h[static_cast<std::size_t>(k)], disc.rhs(k, next)).transpose();
  }
  return out;
}

SolveResult policy_iteration_solve(const MarketModel& model, const Lattice& lattice,
                                   const PolicyIterationConfig& config, const PolicyField* initial_policy) {
  if (!(config.outer_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "outer_tol must be positive");
  const auto start = std::chrono::steady_clock::now();
  SolveResult result;
  SolveReport& report = result.report;
  report.method = "policy_iteration";
  Discretization disc(model, lattice, config, report);
  const int Nt = lattice.time_steps();

  PolicyField policy = initial_policy ? *initial_policy : PolicyField::constant(lattice, Eigen::VectorXd::Zero(model.m()));
  check_policy_shape(policy, model, lattice);
  for (int k = 0; k <= Nt; ++k)
    for (int node = 0; node < lattice.size(); ++node)
      if (!feasible_region_membership(model, policy.h[static_cast<std::size_t>(k)].col(node), lattice.time(k)))
        throw Error(ErrorCode::InfeasibleControl, "initial policy leaves the feasible region");

  const double a0max = report.short_rate_bound;
  Eigen::MatrixXd previous;
  PolicyField improved = policy;
  for (int iter = 0; iter < config.max_outer; ++iter) {
    Eigen::MatrixXd U(Nt + 1, lattice.size());
    U.row(Nt).setOnes();
    // The improved policy of each level only needs that level's new values,
    // so improvement runs inside the backward sweep.
    for (int k = Nt; k >= 0; --k) {
      disc.set_level(k);
      if (k < Nt) {
        const Eigen::VectorXd next = U.row(k + 1).transpose();
        U.row(k) = disc.solve_level(policy.h[static_cast<std::size_t>(k)], disc.rhs(k, next)).transpose();
      }
      disc.improve(U.row(k).transpose(), policy.h[static_cast<std::size_t>(k)],
                   improved.h[static_cast<std::size_t>(k)]);
    }
    report.outer_iterations = iter + 1;
    std::swap(policy, improved);
    if (iter > 0) {
      const Eigen::MatrixXd diff = U - previous;
      const double change = diff.cwiseAbs().maxCoeff();
      const double increase = diff.maxCoeff();
      double renorm = -std::numeric_limits<double>::infinity();
      for (int k = 0; k <= Nt; ++k)
        renorm = std::max(renorm, diff.row(k).maxCoeff() *
                                      std::exp(-model.theta * a0max * (model.T - lattice.time(k))));
      report.sup_change.push_back(change);
      report.max_increase.push_back(increase);
      report.monotonicity_max = std::max(report.monotonicity_max, increase);
      report.monotonicity_max_renormalized = std::max(report.monotonicity_max_renormalized, renorm);
      if (increase > config.monotonicity_slack) ++report.monotonicity_violations;
      if (change <= config.outer_tol) {
        report.converged = true;
        result.value.values = std::move(U);
        break;
      }
    }
    previous = std::move(U);
  }
  if (!report.converged) {
    std::ostringstream os;
    os << "policy iteration did not reach " << config.outer_tol << " in " << config.max_outer << " iterations";
    if (!report.sup_change.empty()) os << " (last change " << report.sup_change.back() << ")";
    throw Error(ErrorCode::NonConvergence, os.str());
  }
  result.value.kind = ValueKind::Transformed;
  result.policy = std::move(policy);
  finish_report(report, result.value, result.policy, model, lattice);
  report.wall_seconds = seconds_since(start);
  return result;
}

SolveResult direct_solve(const MarketModel& model, const Lattice& lattice, const PolicyIterationConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  SolveResult result;
  SolveReport& report = result.report;
  report.method = "direct";
  Discretization disc(model, lattice, config, report);
  const int Nt = lattice.time_steps();
  const int N = lattice.size();

  result.value.kind = ValueKind::Transformed;
  result.value.values.resize(Nt + 1, N);
  result.value.values.row(Nt).setOnes();
  result.policy.h.assign(static_cast<std::size_t>(Nt) + 1, Eigen::MatrixXd::Zero(model.m(), N));

  disc.set_level(Nt);
  disc.improve(Eigen::VectorXd::Ones(N), Eigen::MatrixXd::Zero(model.m(), N), result.policy.h[static_cast<std::size_t>(Nt)]);
  for (int k = Nt - 1; k >= 0; --k) {
    disc.set_level(k);
    const Eigen::VectorXd rhs = disc.rhs(k, result.value.values.row(k + 1).transpose());
    Eigen::MatrixXd H = result.policy.h[static_cast<std::size_t>(k) + 1];
    Eigen::VectorXd u;
    Eigen::MatrixXd H_new;
    double last_change = std::numeric_limits<double>::infinity();
    bool done = false;
    for (int inner = 0; inner < config.max_inner; ++inner) {
      Eigen::VectorXd u_new = disc.solve_level(H, rhs);
      ++report.inner_iterations;
      disc.improve(u_new, H, H_new);
      const double change = inner == 0 ? std::numeric_limits<double>::infinity() : (u_new - u).cwiseAbs().maxCoeff();
      u = std::move(u_new);
      H = H_new;
      // Converged, or stalled at round-off level.
      if (change <= config.inner_tol || (change <= 1e-11 && change >= last_change)) {
        done = true;
        break;
      }
      last_change = change;
    }
    if (!done) {
      std::ostringstream os;
      os << "inner Howard loop did not converge at t = " << lattice.time(k);
      throw Error(ErrorCode::NonConvergence, os.str());
    }
    result.value.values.row(k) = u.transpose();
    result.policy.h[static_cast<std::size_t>(k)] = H;
  }
  report.converged = true;
  report.outer_iterations = 1;
  finish_report(report, result.value, result.policy, model, lattice);
  report.wall_seconds = seconds_since(start);
  return result;
}

ValueField transform(const ValueField& field, double theta, TransformDirection direction) {
  if (!(theta > 0.0)) throw Error(ErrorCode::InvalidArgument, "theta must be positive");
  ValueField out;
  if (direction == TransformDirection::ToRiskSensitive) {
    if (field.kind != ValueKind::Transformed)
      throw Error(ErrorCode::InvalidArgument, "expected a transformed-scale field");
    if (field.values.size() && !(field.values.minCoeff() > 0.0))
      throw Error(ErrorCode::NonPositiveValue, "transformed value must be strictly positive");
    out.kind = ValueKind::RiskSensitive;
    out.values = -field.values.array().log() / theta;
  } else {
    if (field.kind != ValueKind::RiskSensitive)
      throw Error(ErrorCode::InvalidArgument, "expected a risk-sensitive-scale field");
    out.kind = ValueKind::Transformed;
    out.values = (-theta * field.values.array()).exp();
  }
  return out;
}

Eigen::MatrixXd pide_residual(const ValueField& value, const PolicyField& policy, const MarketModel& model,
                              const Lattice& lattice) {
  check_policy_shape(policy, model, lattice);
  const int Nt = lattice.time_steps();
  const int N = lattice.size();
  const int n = lattice.n();
  if (value.values.rows() != Nt + 1 || value.values.cols() != N)
    throw Error(ErrorCode::DimensionMismatch, "value field does not match the lattice");
  Eigen::MatrixXd res(Nt, N);
  LocalCoefficients c;
  for (int k = 0; k < Nt; ++k) {
    const double t = lattice.time(k);
    const Eigen::VectorXd u = value.values.row(k).transpose();
    const Eigen::MatrixXd grad = gradient(u, lattice);
    const Eigen::MatrixXd hess = hessian(u, lattice);
    const Eigen::VectorXd jump = nonlocal_d_a(u, t, model, lattice);
    for (int node = 0; node < N; ++node) {
      c.assign(model, t, lattice.point(node));
      const Eigen::VectorXd h = policy.h[static_cast<std::size_t>(k)].col(node);
      double r = (value.values(k + 1, node) - u(node)) / lattice.dt();
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) r += 0.5 * c.lambda_lambda(a, b) * hess(a * n + b, node);
      r += f_a(c, h).dot(grad.col(node)) + c.theta * g(c, h) * u(node) + jump(node);
      res(k, node) = r;
    }
  }
  return res;
}

nlohmann::json report_to_json(const SolveReport& r) {
  auto finite_or_null = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json j;
  j["method"] = r.method;
  j["converged"] = r.converged;
  j["outer_iterations"] = r.outer_iterations;
  j["sup_change"] = r.sup_change;
  j["max_increase"] = r.max_increase;
  j["monotonicity"] = {{"violations", r.monotonicity_violations},
                       {"max_increase", finite_or_null(r.monotonicity_max)},
                       {"max_increase_renormalized", finite_or_null(r.monotonicity_max_renormalized)}};
  j["inner_iterations"] = r.inner_iterations;
  j["value_bounds"] = {{"short_rate_bound", r.short_rate_bound},
                       {"violations", r.bound_violations},
                       {"min_value", r.min_value},
                       {"max_value_over_bound", r.max_value_over_bound}};
  j["stability_number"] = r.stability_number;
  j["m_matrix_violations"] = r.m_matrix_violations;
  j["infeasible_policy_nodes"] = r.infeasible_policy_nodes;
  j["min_jump_margin"] = r.min_jump_margin;
  j["max_kkt_residual"] = r.max_kkt_residual;
  j["residual_interior"] = {{"max", r.residual_interior_max}, {"median", r.residual_interior_median}};
  j["grid"] = {{"interpolations", r.grid.interpolations},
               {"clamped_targets", r.grid.clamped_targets},
               {"overflow_nodes", r.grid.overflow_nodes}};
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace riskhjb
