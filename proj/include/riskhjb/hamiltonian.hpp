#pragma once

#include <vector>

#include <Eigen/Dense>

#include "riskhjb/convex.hpp"
#include "riskhjb/model.hpp"

namespace riskhjb {

/// Point data for the Hamiltonian. For the transformed problem r is the value
/// of u ~ exp(-theta Phi) at (t, x) and p its gradient.
struct HamiltonianInputs {
  double t = 0.0;
  Eigen::VectorXd x;
  double r = 1.0;
  Eigen::VectorXd p;
};

struct MinimizerResult {
  Eigen::VectorXd h_star;
  double objective = 0.0;  // value of the minimised functional at h_star
  double kkt_residual = 0.0;
  std::vector<int> active_set;  // tight rows of Upsilon' h <= upsilon (then extra rows)
  double jump_margin = 1.0;     // min_j 1 + h' gamma_j
  int iterations = 0;
};

struct MinimizerOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

/// Growth functional g(t, x, h) of the log-wealth exponent.
double g(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h);
double g(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& h, const MarketModel& model);

/// Factor drift under the controlled measure.
Eigen::VectorXd f(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h);
Eigen::VectorXd f(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& h, const MarketModel& model);

/// f minus the jump compensator sum_j lambda_j xi_j.
Eigen::VectorXd f_a(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h);
Eigen::VectorXd f_a(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& h, const MarketModel& model);

/// Auxiliary functional l(h; x, p) whose minimiser maximises L^h; p is the
/// gradient of the risk-sensitive value Phi.
double ell(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h,
           const Eigen::Ref<const Eigen::VectorXd>& p);
double ell(const Eigen::VectorXd& h, const HamiltonianInputs& inputs, const MarketModel& model);

/// l(.; x, p) as a ConvexObjective; the jump term diverges on the hyperplanes
/// 1 + h' gamma_j = 0 and so keeps iterates strictly inside J0.
class EllObjective final : public ConvexObjective {
 public:
  EllObjective(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& p);

  int dim() const override { return static_cast<int>(quad_.rows()); }
  bool in_domain(const Eigen::VectorXd& h) const override;
  double value(const Eigen::VectorXd& h) const override;
  void gradient_hessian(const Eigen::VectorXd& h, Eigen::VectorXd& grad,
                        Eigen::MatrixXd& hess) const override;
  double domain_step_limit(const Eigen::VectorXd& h, const Eigen::VectorXd& d) const override;

 private:
  double theta_;
  Eigen::MatrixXd quad_;    // (theta + 1) Sigma Sigma'
  Eigen::VectorXd linear_;  // theta Sigma Lambda' p - a_hat + sum lambda_j gamma_j
  std::vector<Eigen::VectorXd> gamma_;
  std::vector<double> weight_;  // lambda_j (1 - theta xi_j' p)
};

/// Minimise l(.; x, p) over J intersected with {extra_A h <= extra_b}.
MinimizerResult minimize_ell(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& p,
                             const MarketModel& model, const MinimizerOptions& options = {},
                             const Eigen::MatrixXd& extra_A = Eigen::MatrixXd(),
                             const Eigen::VectorXd& extra_b = Eigen::VectorXd(),
                             const Eigen::VectorXd* start_hint = nullptr);

/// argmin_{h in J} { f_a' p + theta g r } for r > 0. The minimiser is reported
/// in h_star; `objective` holds the Hamiltonian value f_a(h*)' p + theta g(h*) r.
MinimizerResult minimize_hamiltonian(const HamiltonianInputs& inputs, const MarketModel& model,
                                     const MinimizerOptions& options = {});

/// f_a(h)' p + theta g(h) r at a given control.
double hamiltonian_objective(const LocalCoefficients& c, const Eigen::Ref<const Eigen::VectorXd>& h,
                             double r, const Eigen::Ref<const Eigen::VectorXd>& p);

/// H_a(s, x, r, p) = inf_{h in J} { f_a' p + theta g r }.
double H_a(const HamiltonianInputs& inputs, const MarketModel& model, const MinimizerOptions& options = {});

/// H(s, x, r, p) = inf_{h in J} { f' p + theta g r } = H_a + (sum_j lambda_j xi_j)' p.
double H(const HamiltonianInputs& inputs, const MarketModel& model, const MinimizerOptions& options = {});

}  // namespace riskhjb
