#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "riskhjb/hamiltonian.hpp"
#include "riskhjb/model.hpp"

namespace riskhjb {

/// Linear-Gaussian specialisation without jumps:
/// b = b0 + B x, a_hat = a_hat0 + A x, a0 = c0 + c1' x, constant Lambda and Sigma.
struct LGQSpec {
  Eigen::VectorXd b0;
  Eigen::MatrixXd B;       // n x n
  Eigen::MatrixXd Lambda;  // n x M
  Eigen::VectorXd a_hat0;
  Eigen::MatrixXd A;       // m x n
  Eigen::MatrixXd Sigma;   // m x M
  double c0 = 0.0;
  Eigen::VectorXd c1;
  double theta = 1.0;
  double T = 1.0;

  Eigen::Index n() const { return b0.size(); }
  Eigen::Index m() const { return a_hat0.size(); }
};

/// Reads the affine parameters off a model. Saturated coefficients are
/// accepted when no cap binds on [lo, hi]; throws InvalidArgument otherwise,
/// or when the model has jumps or state-dependent Lambda/Sigma.
LGQSpec lgq_from_model(const MarketModel& model, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

/// Unsaturated affine model with these coefficients and no constraints
/// binding within |h| <= bound.
MarketModel lgq_to_model(const LGQSpec& spec, double bound = 1e6);

/// Quadratic value Phi(t, x) = x'Q x / 2 + q' x + k sampled on a uniform grid.
struct RiccatiSolution {
  std::vector<double> times;  // 0 = t_0 < ... < t_N = T
  std::vector<Eigen::MatrixXd> Q;
  std::vector<Eigen::VectorXd> q;
  std::vector<double> k;

  double value(int i, const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(int i, const Eigen::VectorXd& x) const;
  /// Linear interpolation in t between samples.
  double value_at(double t, const Eigen::VectorXd& x) const;
  /// Unconstrained optimal control at sample i.
  Eigen::VectorXd policy(const LGQSpec& spec, int i, const Eigen::VectorXd& x) const;
};

/// Integrates the coefficient ODEs backward from Q = q = k = 0 at T with
/// fixed-step RK4. Throws BlowUp if the solution escapes before t = 0.
RiccatiSolution riccati_solve(const LGQSpec& spec, int ode_steps = 10000);

/// Max |HJB residual| of the quadratic ansatz at the probe points (time,
/// state). Time derivatives come from fourth-order differences of the samples,
/// state derivatives are analytic, and the Hamiltonian is evaluated with the
/// model's f and g at the closed-form maximiser.
double verify_ansatz(const LGQSpec& spec, const RiccatiSolution& solution,
                     const std::vector<std::pair<double, Eigen::VectorXd>>& probes);

/// Best point of a regular grid over J with `grid_density` points per axis.
/// The search box comes from axis-aligned constraint rows and jump rows;
/// axes left unbounded use [-fallback_radius, fallback_radius]. Requires m <= 2.
Eigen::VectorXd brute_force_argmin(const HamiltonianInputs& inputs, const MarketModel& model, int grid_density,
                                   double fallback_radius = 10.0);

/// Search box used by brute_force_argmin, one (lo, hi) per asset.
std::pair<Eigen::VectorXd, Eigen::VectorXd> brute_force_box(const MarketModel& model, double fallback_radius);

/// Q, q, k at the given times (linear interpolation between samples).
nlohmann::json riccati_to_json(const RiccatiSolution& solution, const std::vector<double>& times);

}  // namespace riskhjb
