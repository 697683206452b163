#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace riskhjb {

/// Smooth strictly convex objective with an open (possibly unbounded) domain.
class ConvexObjective {
 public:
  virtual ~ConvexObjective() = default;

  virtual int dim() const = 0;
  virtual bool in_domain(const Eigen::VectorXd& h) const = 0;
  virtual double value(const Eigen::VectorXd& h) const = 0;
  virtual void gradient_hessian(const Eigen::VectorXd& h, Eigen::VectorXd& grad,
                                Eigen::MatrixXd& hess) const = 0;

  /// Largest step along d that keeps h + step * d inside the open domain.
  virtual double domain_step_limit(const Eigen::VectorXd& /*h*/,
                                   const Eigen::VectorXd& /*d*/) const {
    return std::numeric_limits<double>::infinity();
  }
};

struct ConstrainedMinimum {
  Eigen::VectorXd h;
  double value = 0.0;
  double kkt_residual = 0.0;
  std::vector<int> active_set;
  Eigen::VectorXd multipliers;  // aligned with active_set
  int iterations = 0;
  bool converged = false;
};

/// Primal active-set damped Newton method for min f(h) s.t. A h <= b.
/// `start` must lie in the objective domain and satisfy A start <= b.
ConstrainedMinimum minimize_convex(const ConvexObjective& objective, const Eigen::MatrixXd& A,
                                   const Eigen::VectorXd& b, const Eigen::VectorXd& start,
                                   double tol, int max_iter);

struct InteriorPoint {
  Eigen::VectorXd point;
  /// Largest s with a_k'y + s |a_k| <= b_k for all rows (capped at 1); > 0 iff the
  /// polytope has nonempty interior (within the search box).
  double margin = 0.0;
};

/// Log-barrier phase-one solve for a well-centred point of {y : A y <= b},
/// searched inside the box |y_i| <= box_radius.
InteriorPoint find_interior_point(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                  double box_radius = 1e3);

}  // namespace riskhjb
