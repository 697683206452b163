#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "riskhjb/grid.hpp"
#include "riskhjb/model.hpp"

namespace riskhjb {

enum class Measure { P, Ph };

struct SimConfig {
  long long paths = 100000;
  double dt = 0.01;
  std::uint64_t seed = 1;
  Measure measure = Measure::P;
  bool antithetic = false;
  int threads = 0;  // 0: hardware concurrency, capped by RISKHJB_THREADS
};

struct SimEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long long paths = 0;
  Measure measure = Measure::P;
  long long excluded_paths = 0;   // non-finite samples dropped
  long long clamped_steps = 0;    // policy lookups outside the lattice
  long long path_steps = 0;
};

/// Feedback control h(t, x): a constant, or a PolicyField looked up with the
/// nearest time level and multilinear interpolation in x (clamped to the box).
class Policy {
 public:
  Policy() = default;
  static Policy constant(Eigen::VectorXd h);
  static Policy field(const PolicyField& field, const Lattice& lattice);

  Eigen::Index m() const;
  /// Writes h(t, x) into `out`; returns true if x had to be clamped.
  bool evaluate(double t, const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const;
  bool is_constant() const { return field_ == nullptr; }

 private:
  Eigen::VectorXd constant_;
  const PolicyField* field_ = nullptr;
  const Lattice* lattice_ = nullptr;
};

struct JumpEvent {
  int step = 0;  // the jump happens at the end of this step
  int atom = 0;
};

/// One simulated path: step times, states at step starts and the end state,
/// Brownian increments per step, and realised jumps.
struct SimulatedPath {
  std::vector<double> times;  // size steps + 1
  Eigen::MatrixXd X;          // n x (steps + 1), after any factor jump
  Eigen::MatrixXd dW;         // M x steps
  std::vector<JumpEvent> jumps;
  long long clamped_steps = 0;
};

struct PathBundle {
  double t0 = 0.0;
  Eigen::VectorXd x0;
  Measure measure = Measure::P;
  std::vector<SimulatedPath> paths;
};

/// Euler-Maruyama for the factor with exact per-atom exponential jump clocks
/// inserted as extra steps. Under P the drift is b - sum lambda_j xi_j and all
/// atoms fire; under Ph the drift is f_a(t, x, h) and only factor atoms fire.
PathBundle simulate_factors(const MarketModel& model, const Policy& policy, const Eigen::VectorXd& x0, double t0,
                            const SimConfig& config);

/// chi^h(T) along each P-path of the bundle.
std::vector<double> doleans_chi(const PathBundle& bundle, const Policy& policy, const MarketModel& model);

/// Estimate of Phi~(t0, x0) = E[exp(-theta ln V_T)] under the policy, by
/// either measure.
SimEstimate estimate_I_tilde(const MarketModel& model, const Policy& policy, double t0, const Eigen::VectorXd& x0,
                             const SimConfig& config);

/// Sample mean and standard error of chi^h(T) under P.
SimEstimate estimate_chi_mean(const MarketModel& model, const Policy& policy, double t0, const Eigen::VectorXd& x0,
                              const SimConfig& config);

struct WealthEstimate {
  SimEstimate J;               // -(1/theta) ln mean V_T^-theta, delta-method std error
  double mean_log_wealth = 0.0;
  double var_log_wealth = 0.0;  // population variance (1/N)
  std::vector<double> log_wealth;  // per path, kept for paired comparisons
};

/// Log-Euler wealth with exact jump factors, v0 = 1, under P.
WealthEstimate estimate_J_wealth(const MarketModel& model, const Policy& policy, const Eigen::VectorXd& x0,
                                 double t0, const SimConfig& config, bool keep_paths = false);

struct FeynmanKacRecord {
  double pde_value = 0.0;
  SimEstimate mc;
  double allowance = 0.0;  // discretisation allowance added to the band
  double band = 0.0;       // 3 std_error + allowance
  double difference = 0.0;
  bool passed = false;
};

/// |Phi~_PDE(t0, x0) - E[Phi~ estimate under h*]| <= 3 std_error + allowance.
FeynmanKacRecord verify_feynman_kac(const MarketModel& model, const Lattice& lattice, const ValueField& value,
                                    const PolicyField& policy, double t0, const Eigen::VectorXd& x0,
                                    const SimConfig& config, double allowance);

struct ProbeRow {
  std::string label;
  double J = 0.0;
  double std_error = 0.0;
  double advantage = 0.0;           // J(h*) - J(perturbed)
  double advantage_std_error = 0.0;  // paired, common random numbers
  bool passed = false;               // advantage >= -3 advantage_std_error
};

struct OptimalityProbe {
  double J_star = 0.0;
  double J_star_std_error = 0.0;
  std::vector<ProbeRow> rows;
  bool passed = false;
};

/// Compares J at h* with five perturbed feasible policies (scalings 0.9, 1.1,
/// 0.75, 1.25 and one random direction), shrunk toward h* where needed to stay
/// in J. All runs share the seed.
OptimalityProbe optimality_probe(const MarketModel& model, const Lattice& lattice, const PolicyField& policy,
                                 const Eigen::VectorXd& x0, const SimConfig& config);

/// Sum with pairwise (cascade) reduction.
double pairwise_sum(const double* data, std::size_t count);

/// Worker count honouring RISKHJB_THREADS.
int worker_threads(int requested);

nlohmann::json to_json(const SimEstimate& e);
nlohmann::json to_json(const FeynmanKacRecord& r);
nlohmann::json to_json(const OptimalityProbe& p);

}  // namespace riskhjb
