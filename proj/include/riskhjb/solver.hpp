#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskhjb/grid.hpp"
#include "riskhjb/hamiltonian.hpp"
#include "riskhjb/model.hpp"

namespace riskhjb {

enum class TimeScheme { ImplicitEuler };
enum class NonlocalTreatment { LaggedExplicit };

struct PolicyIterationConfig {
  int max_outer = 30;
  double outer_tol = 1e-8;
  TimeScheme scheme = TimeScheme::ImplicitEuler;
  NonlocalTreatment nonlocal = NonlocalTreatment::LaggedExplicit;
  double monotonicity_slack = 1e-8;
  MinimizerOptions minimizer{};
  // direct_solve only: per-level Howard loop.
  double inner_tol = 1e-13;
  int max_inner = 50;
};

struct SolveReport {
  std::string method;
  bool converged = false;
  int outer_iterations = 0;
  std::vector<double> sup_change;  // sup |u^{k+1} - u^k| per outer iteration (from the second solve on)
  std::vector<double> max_increase;  // max (u^{k+1} - u^k) per outer iteration
  int monotonicity_violations = 0;   // iterations whose increase exceeds the slack
  double monotonicity_max = -std::numeric_limits<double>::infinity();
  double monotonicity_max_renormalized = -std::numeric_limits<double>::infinity();
  long long inner_iterations = 0;  // direct_solve Howard steps

  double short_rate_bound = 0.0;  // sup |a0| over the box
  long long bound_violations = 0;
  double min_value = 0.0;
  double max_value_over_bound = 0.0;  // max of Phi~ / exp(theta a0_max (T - t))

  double stability_number = 0.0;  // max over levels of dt (theta sup|g| + sum lambda)
  long long m_matrix_violations = 0;
  long long infeasible_policy_nodes = 0;
  double min_jump_margin = 1.0;
  double max_kkt_residual = 0.0;

  double residual_interior_max = 0.0;
  double residual_interior_median = 0.0;

  GridDiagnostics grid;
  double wall_seconds = 0.0;
};

struct SolveResult {
  ValueField value;  // Phi~
  PolicyField policy;
  SolveReport report;
};

/// Howard policy iteration on the transformed equation, from h^0 = 0 unless
/// an initial policy is given.
SolveResult policy_iteration_solve(const MarketModel& model, const Lattice& lattice,
                                   const PolicyIterationConfig& config = {},
                                   const PolicyField* initial_policy = nullptr);

/// One backward sweep; each level is solved to its own fixed point by an
/// inner Howard loop warm-started from the policy of the later level.
SolveResult direct_solve(const MarketModel& model, const Lattice& lattice,
                         const PolicyIterationConfig& config = {});

/// Value of u(t) for a fixed policy (one linear backward sweep).
ValueField evaluate_policy(const MarketModel& model, const Lattice& lattice, const PolicyField& policy,
                           SolveReport* report = nullptr);

enum class TransformDirection { ToRiskSensitive, ToTransformed };

/// Phi = -(1/theta) ln Phi~ or Phi~ = exp(-theta Phi), elementwise.
ValueField transform(const ValueField& field, double theta, TransformDirection direction);

/// Discrete left-hand side of the transformed equation at level k = 0..N_t-1
/// (row k), with centered stencils and the jump term evaluated on the same level.
Eigen::MatrixXd pide_residual(const ValueField& value, const PolicyField& policy, const MarketModel& model,
                              const Lattice& lattice);

/// Bound exp(theta a0_max (T - t)) on Phi~ at level k.
double value_upper_bound(const MarketModel& model, const Lattice& lattice, int k);

nlohmann::json report_to_json(const SolveReport& report);

}  // namespace riskhjb
