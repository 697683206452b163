#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "riskhjb/error.hpp"

namespace riskhjb {

enum class CoefficientFamily { Constant, Affine, AffineSaturated };

/// Matrix-valued coefficient F(t, x) = clamp(F0 + t * Ft + Fx x) of one of three
/// parametric families. Entries are stored flattened in row-major order; the
/// state slope has one row per entry and one column per factor.
class CoefficientFn {
 public:
  CoefficientFn() = default;

  static CoefficientFn constant(const Eigen::MatrixXd& value);
  static CoefficientFn affine(const Eigen::MatrixXd& value, const Eigen::MatrixXd& state_slope,
                              const Eigen::VectorXd& time_slope = Eigen::VectorXd());
  static CoefficientFn affine_saturated(const Eigen::MatrixXd& value,
                                        const Eigen::MatrixXd& state_slope,
                                        const Eigen::VectorXd& time_slope,
                                        const Eigen::VectorXd& lower,
                                        const Eigen::VectorXd& upper);

  CoefficientFamily family() const { return family_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  Eigen::Index size() const { return rows_ * cols_; }
  /// 0 for constants (accepts any state dimension).
  Eigen::Index state_dim() const { return state_slope_.cols(); }

  const Eigen::VectorXd& base() const { return base_; }
  const Eigen::MatrixXd& state_slope() const { return state_slope_; }
  const Eigen::VectorXd& time_slope() const { return time_slope_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }

  /// Flattened (row-major) value written into `out`, which must have size().
  void evaluate_into(double t, const Eigen::Ref<const Eigen::VectorXd>& x,
                     Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::MatrixXd operator()(double t, const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double scalar(double t, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// K with |F(t,y) - F(s,x)| <= K (|t-s| + |y-x|) in the Frobenius norm.
  double lipschitz_constant() const;
  /// Exact test on the parameters: the function is zero everywhere.
  bool is_identically_zero() const;
  /// Bound on max_i |F_i| over [0,T] x box. Exact for all three families since
  /// each entry is monotone in every coordinate.
  double sup_abs_on_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double T) const;

 private:
  CoefficientFamily family_ = CoefficientFamily::Constant;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  Eigen::VectorXd base_;
  Eigen::MatrixXd state_slope_;
  Eigen::VectorXd time_slope_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

/// One atom of the finite-activity jump measure. A validated atom moves either
/// the factors (xi) or the assets (gamma), never both.
struct JumpAtom {
  double lambda = 0.0;
  Eigen::VectorXd gamma;  // asset mark, size m
  CoefficientFn xi;       // factor mark, n x 1 (empty means zero)

  static JumpAtom factor(double lambda, CoefficientFn xi, Eigen::Index m);
  static JumpAtom asset(double lambda, Eigen::VectorXd gamma);

  bool moves_assets() const { return gamma.size() > 0 && (gamma.array() != 0.0).any(); }
  bool moves_factors() const { return xi.size() > 0 && !xi.is_identically_zero(); }
};

enum class CompensationPolicy { AllCompensated };

struct JumpMeasure {
  std::vector<JumpAtom> atoms;
  CompensationPolicy z0_policy = CompensationPolicy::AllCompensated;

  double total_intensity() const;
};

struct FactorModel {
  Eigen::Index n = 1;
  CoefficientFn b;       // n x 1
  CoefficientFn Lambda;  // n x M
};

struct AssetModel {
  Eigen::Index m = 1;
  CoefficientFn a0;     // 1 x 1
  CoefficientFn a;      // m x 1
  CoefficientFn Sigma;  // m x M
};

/// Investment constraints Upsilon' h <= upsilon, Upsilon is m x r.
struct ConstraintSet {
  Eigen::MatrixXd Upsilon;
  Eigen::VectorXd upsilon;
};

struct MarketModel {
  FactorModel factor;
  AssetModel assets;
  JumpMeasure nu;
  ConstraintSet constraints;
  double theta = 1.0;
  double T = 1.0;

  Eigen::Index n() const { return factor.n; }
  Eigen::Index m() const { return assets.m; }
  Eigen::Index M() const { return factor.n + assets.m; }
};

/// All coefficients evaluated at one point (t, x). Buffers are reused by
/// assign(), so hot loops can refresh a LocalCoefficients without allocating.
struct LocalCoefficients {
  double t = 0.0;
  double theta = 1.0;
  Eigen::VectorXd x;
  double a0 = 0.0;
  Eigen::VectorXd a_hat;           // a - a0 * 1
  Eigen::VectorXd b;               // factor drift
  Eigen::MatrixXd Sigma;           // m x M
  Eigen::MatrixXd Lambda;          // n x M
  Eigen::MatrixXd sigma_sigma;     // Sigma Sigma'
  Eigen::MatrixXd lambda_lambda;   // Lambda Lambda'
  Eigen::MatrixXd sigma_lambda;    // Sigma Lambda', m x n
  Eigen::VectorXd intensity;       // lambda_j
  std::vector<Eigen::VectorXd> xi;     // per atom, n
  std::vector<Eigen::VectorXd> gamma;  // per atom, m
  Eigen::VectorXd xi_compensator;      // sum_j lambda_j xi_j
  Eigen::VectorXd scratch;             // evaluation buffer

  LocalCoefficients() = default;
  LocalCoefficients(const MarketModel& model, double t, const Eigen::Ref<const Eigen::VectorXd>& x) {
    assign(model, t, x);
  }
  void assign(const MarketModel& model, double t, const Eigen::Ref<const Eigen::VectorXd>& x);
};

/// Sampling plan for the probe-based assumption checks.
struct ProbeSpec {
  Eigen::VectorXd lower;  // per-axis box
  Eigen::VectorXd upper;
  int quasi_random_points = 1000;
  std::vector<Eigen::VectorXd> extra_points;  // e.g. lattice nodes, probed at t = 0 and T
};

struct AssumptionCheck {
  std::string id;          // short machine id, e.g. "simultaneous_jumps"
  std::string assumption;  // human-readable statement of the condition
  bool passed = true;
  bool blocking = true;    // informational checks never reject the model
  double metric = 0.0;
  std::string detail;
  std::optional<ErrorCode> failure;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  double min_eig_factor_diffusion = 0.0;
  double min_eig_asset_diffusion = 0.0;
  double constraint_margin = 0.0;

  bool accepted() const;
  /// Code of the first blocking failure, if any.
  std::optional<ErrorCode> first_failure() const;
};

/// Throws Error(DimensionMismatch) for structurally malformed models; every
/// other assumption is reported, not thrown.
void check_dimensions(const MarketModel& model);

ValidationReport validate_model(const MarketModel& model, const ProbeSpec& probe);

/// Throws the first blocking failure of the report as an Error.
void require_valid(const ValidationReport& report);

/// h in J: Upsilon' h <= upsilon and 1 + h' gamma_j > 0 for every atom.
bool feasible_region_membership(const MarketModel& model, const Eigen::Ref<const Eigen::VectorXd>& h,
                                double t);

/// Smallest 1 + h' gamma_j over the atoms (1 when no atom moves the assets).
double jump_margin(const MarketModel& model, const Eigen::Ref<const Eigen::VectorXd>& h);

/// Bound on |a0| over [0,T] x box, used for the value bound exp(theta a0_max (T-t)).
double short_rate_bound(const MarketModel& model, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

}  // namespace riskhjb
