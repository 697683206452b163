#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "json.hpp"
#include "riskhjb/model.hpp"

namespace riskhjb {

/// Uniform tensor lattice on a box in R^n (n = 1 or 2) times a uniform time
/// grid t_k = k dt, k = 0..N_t. Nodes are numbered with axis 0 fastest.
class Lattice {
 public:
  Lattice() = default;
  Lattice(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<int> nodes, int time_steps, double T);

  int n() const { return static_cast<int>(lower_.size()); }
  int nodes(int axis) const { return nodes_[static_cast<std::size_t>(axis)]; }
  int size() const { return size_; }
  double dx(int axis) const { return dx_(axis); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const Eigen::VectorXd& spacing() const { return dx_; }

  int time_steps() const { return time_steps_; }
  double T() const { return T_; }
  double dt() const { return T_ / time_steps_; }
  double time(int k) const { return k == time_steps_ ? T_ : k * dt(); }

  std::array<int, 2> multi_index(int node) const;
  int index(int i0, int i1 = 0) const { return i0 + nodes_[0] * i1; }
  double coord(int node, int axis) const;
  Eigen::VectorXd point(int node) const;
  bool on_boundary(int node, int axis) const;
  bool on_boundary(int node) const;

  /// Nodes whose distance to every face is at least `margin_fraction` of the
  /// box width along that axis.
  std::vector<int> interior_core(double margin_fraction = 0.2) const;
  /// Node nearest to x (clamped into the box).
  int nearest_node(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Same box and time horizon with refined node and step counts.
  Lattice refined(int node_factor, int time_factor) const;

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Eigen::VectorXd dx_;
  std::vector<int> nodes_;
  int size_ = 0;
  int time_steps_ = 1;
  double T_ = 1.0;
};

enum class ValueKind { Transformed, RiskSensitive };

/// Values on (time index, node); row k holds time t_k.
struct ValueField {
  ValueKind kind = ValueKind::Transformed;
  Eigen::MatrixXd values;

  Eigen::VectorXd slice(int k) const { return values.row(k).transpose(); }
};

/// Controls on (time index, node): h[k] is m x nodes.
struct PolicyField {
  std::vector<Eigen::MatrixXd> h;

  int m() const { return h.empty() ? 0 : static_cast<int>(h.front().rows()); }
  static PolicyField constant(const Lattice& lattice, const Eigen::VectorXd& h0);
};

/// Counters filled by the nonlocal operators and by interpolation.
struct GridDiagnostics {
  long long interpolations = 0;
  long long clamped_targets = 0;  // jump targets outside the box, clamped to the boundary
  long long overflow_nodes = 0;   // exponent beyond +-700 in the Phi-scale operator
};

/// Multilinear interpolation of a nodal slice; x outside the box is clamped
/// and counted.
double interpolate(const Lattice& lattice, const Eigen::Ref<const Eigen::VectorXd>& slice,
                   const Eigen::Ref<const Eigen::VectorXd>& x, GridDiagnostics* diag = nullptr);

/// Interpolation weights: (node, weight) pairs, at most 2^n of them.
int interpolation_stencil(const Lattice& lattice, const Eigen::Ref<const Eigen::VectorXd>& x,
                          std::array<int, 4>& nodes, std::array<double, 4>& weights, bool& clamped);

/// Sparse matrix J with (J u)_i = sum_j lambda_j [u(x_i + xi_j(t, x_i)) - u(x_i)].
Eigen::SparseMatrix<double, Eigen::RowMajor> jump_operator(double t, const MarketModel& model,
                                                           const Lattice& lattice,
                                                           GridDiagnostics* diag = nullptr);

/// d_a on the transformed scale: sum_j lambda_j [u(t, x + xi_j) - u(t, x)] per node.
Eigen::VectorXd nonlocal_d_a(const Eigen::Ref<const Eigen::VectorXd>& slice, double t,
                             const MarketModel& model, const Lattice& lattice,
                             GridDiagnostics* diag = nullptr);

/// Nonlocal term of the risk-sensitive equation:
/// sum_j lambda_j [ -(1/theta)(exp(-theta (u(x + xi_j) - u(x))) - 1) - xi_j' p ].
/// `p` is n x nodes.
Eigen::VectorXd nonlocal_I_NL(const Eigen::Ref<const Eigen::VectorXd>& slice, const Eigen::MatrixXd& p,
                              double t, const MarketModel& model, const Lattice& lattice,
                              GridDiagnostics* diag = nullptr);

/// Centered differences inside, one-sided second order on the faces. Result
/// is n x nodes.
Eigen::MatrixXd gradient(const Eigen::Ref<const Eigen::VectorXd>& slice, const Lattice& lattice);

/// Per-node Hessian, stored as (n*n) x nodes in column-major block order.
Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& slice, const Lattice& lattice);

// ---------------------------------------------------------------- serialization

nlohmann::json lattice_to_json(const Lattice& lattice);
Lattice lattice_from_json(const nlohmann::json& j);

/// Header `t,x0[,x1],value`; one row per (time index, node). Pass
/// time_index >= 0 to write a single time level.
void write_value_csv(std::ostream& os, const ValueField& field, const Lattice& lattice, int time_index = -1);
/// Header `t,x0[,x1],h0[,h1...]`.
void write_policy_csv(std::ostream& os, const PolicyField& field, const Lattice& lattice, int time_index = -1);

ValueField read_value_csv(std::istream& is, const Lattice& lattice, ValueKind kind);
PolicyField read_policy_csv(std::istream& is, const Lattice& lattice, int m);

}  // namespace riskhjb
