#include "riskhjb/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace riskhjb {

namespace {

constexpr double kExpLimit = 700.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> split_numbers(const std::string& line, std::size_t expected, std::size_t line_no) {
  std::vector<double> out;
  out.reserve(expected);
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t next = std::min(line.find(',', pos), line.size());
    const std::string cell = line.substr(pos, next - pos);
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end == cell.c_str())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
    out.push_back(v);
    pos = next + 1;
  }
  if (out.size() != expected)
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                           std::to_string(expected) + " columns, got " +
                                           std::to_string(out.size()));
  return out;
}

void check_coordinates(const std::vector<double>& row, const Lattice& lattice, int k, int node,
                       std::size_t line_no) {
  const double tol = 1e-9 * (1.0 + lattice.T());
  bool ok = std::abs(row[0] - lattice.time(k)) <= tol;
  for (int a = 0; a < lattice.n(); ++a)
    ok = ok && std::abs(row[static_cast<std::size_t>(a) + 1] - lattice.coord(node, a)) <=
                   1e-9 * (1.0 + std::abs(lattice.coord(node, a)));
  if (!ok)
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": coordinates do not match the lattice");
}

// First derivative along `axis` of a nodal slice.
Eigen::VectorXd axis_derivative(const Eigen::Ref<const Eigen::VectorXd>& u, const Lattice& lattice, int axis) {
  const int N = lattice.nodes(axis);
  const double h = lattice.dx(axis);
  const int stride = axis == 0 ? 1 : lattice.nodes(0);
  Eigen::VectorXd out(lattice.size());
  for (int node = 0; node < lattice.size(); ++node) {
    const int i = lattice.multi_index(node)[static_cast<std::size_t>(axis)];
    if (i == 0) {
      out(node) = (-3.0 * u(node) + 4.0 * u(node + stride) - u(node + 2 * stride)) / (2.0 * h);
    } else if (i == N - 1) {
      out(node) = (3.0 * u(node) - 4.0 * u(node - stride) + u(node - 2 * stride)) / (2.0 * h);
    } else {
      out(node) = (u(node + stride) - u(node - stride)) / (2.0 * h);
    }
  }
  return out;
}

Eigen::VectorXd axis_second_derivative(const Eigen::Ref<const Eigen::VectorXd>& u, const Lattice& lattice,
                                       int axis) {
  const int N = lattice.nodes(axis);
  const double h2 = lattice.dx(axis) * lattice.dx(axis);
  const int s = axis == 0 ? 1 : lattice.nodes(0);
  Eigen::VectorXd out(lattice.size());
  for (int node = 0; node < lattice.size(); ++node) {
    const int i = lattice.multi_index(node)[static_cast<std::size_t>(axis)];
    if (i == 0) {
      out(node) = (2.0 * u(node) - 5.0 * u(node + s) + 4.0 * u(node + 2 * s) - u(node + 3 * s)) / h2;
    } else if (i == N - 1) {
      out(node) = (2.0 * u(node) - 5.0 * u(node - s) + 4.0 * u(node - 2 * s) - u(node - 3 * s)) / h2;
    } else {
      out(node) = (u(node + s) - 2.0 * u(node) + u(node - s)) / h2;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Lattice

Lattice::Lattice(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<int> nodes, int time_steps, double T)
    : lower_(std::move(lower)), upper_(std::move(upper)), nodes_(std::move(nodes)), time_steps_(time_steps), T_(T) {
  const auto n = lower_.size();
  if (n < 1 || n > 2) throw Error(ErrorCode::InvalidArgument, "lattice supports n = 1 or 2");
  if (upper_.size() != n || static_cast<Eigen::Index>(nodes_.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "lattice bounds and node counts must have n entries");
  if (time_steps_ < 1) throw Error(ErrorCode::InvalidArgument, "lattice needs at least one time step");
  if (!(T_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "lattice horizon must be positive");
  dx_.resize(n);
  size_ = 1;
  for (Eigen::Index a = 0; a < n; ++a) {
    if (nodes_[static_cast<std::size_t>(a)] < 8)
      throw Error(ErrorCode::InvalidArgument, "lattice needs at least 8 nodes per axis");
    if (!(lower_(a) < upper_(a))) throw Error(ErrorCode::InvalidArgument, "lattice bounds must be ordered");
    dx_(a) = (upper_(a) - lower_(a)) / (nodes_[static_cast<std::size_t>(a)] - 1);
    size_ *= nodes_[static_cast<std::size_t>(a)];
  }
}

std::array<int, 2> Lattice::multi_index(int node) const {
  if (n() == 1) return {node, 0};
  return {node % nodes_[0], node / nodes_[0]};
}

double Lattice::coord(int node, int axis) const {
  const int i = multi_index(node)[static_cast<std::size_t>(axis)];
  if (i == nodes(axis) - 1) return upper_(axis);
  return lower_(axis) + i * dx_(axis);
}

Eigen::VectorXd Lattice::point(int node) const {
  Eigen::VectorXd x(n());
  for (int a = 0; a < n(); ++a) x(a) = coord(node, a);
  return x;
}

bool Lattice::on_boundary(int node, int axis) const {
  const int i = multi_index(node)[static_cast<std::size_t>(axis)];
  return i == 0 || i == nodes(axis) - 1;
}

bool Lattice::on_boundary(int node) const {
  for (int a = 0; a < n(); ++a)
    if (on_boundary(node, a)) return true;
  return false;
}

std::vector<int> Lattice::interior_core(double margin_fraction) const {
  std::vector<int> out;
  for (int node = 0; node < size_; ++node) {
    bool inside = true;
    for (int a = 0; a < n(); ++a) {
      const double margin = margin_fraction * (upper_(a) - lower_(a));
      const double x = coord(node, a);
      if (x < lower_(a) + margin - 1e-12 || x > upper_(a) - margin + 1e-12) inside = false;
    }
    if (inside) out.push_back(node);
  }
  return out;
}

int Lattice::nearest_node(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::array<int, 2> idx{0, 0};
  for (int a = 0; a < n(); ++a) {
    const double s = std::round((x(a) - lower_(a)) / dx_(a));
    idx[static_cast<std::size_t>(a)] = static_cast<int>(std::clamp(s, 0.0, nodes(a) - 1.0));
  }
  return index(idx[0], idx[1]);
}

Lattice Lattice::refined(int node_factor, int time_factor) const {
  std::vector<int> nodes = nodes_;
  for (auto& N : nodes) N = (N - 1) * node_factor + 1;
  return Lattice(lower_, upper_, nodes, time_steps_ * time_factor, T_);
}

PolicyField PolicyField::constant(const Lattice& lattice, const Eigen::VectorXd& h0) {
  PolicyField p;
  p.h.assign(static_cast<std::size_t>(lattice.time_steps()) + 1,
             h0.replicate(1, lattice.size()));
  return p;
}

// ---------------------------------------------------------------- interpolation

int interpolation_stencil(const Lattice& lattice, const Eigen::Ref<const Eigen::VectorXd>& x,
                          std::array<int, 4>& nodes, std::array<double, 4>& weights, bool& clamped) {
  clamped = false;
  std::array<int, 2> i0{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int a = 0; a < lattice.n(); ++a) {
    double xa = x(a);
    if (xa < lattice.lower()(a)) {
      xa = lattice.lower()(a);
      clamped = true;
    } else if (xa > lattice.upper()(a)) {
      xa = lattice.upper()(a);
      clamped = true;
    }
    const double s = (xa - lattice.lower()(a)) / lattice.dx(a);
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, lattice.nodes(a) - 2);
    i0[static_cast<std::size_t>(a)] = i;
    frac[static_cast<std::size_t>(a)] = std::clamp(s - i, 0.0, 1.0);
  }
  if (lattice.n() == 1) {
    nodes[0] = i0[0];
    nodes[1] = i0[0] + 1;
    weights[0] = 1.0 - frac[0];
    weights[1] = frac[0];
    return 2;
  }
  const double fx = frac[0];
  const double fy = frac[1];
  nodes[0] = lattice.index(i0[0], i0[1]);
  nodes[1] = lattice.index(i0[0] + 1, i0[1]);
  nodes[2] = lattice.index(i0[0], i0[1] + 1);
  nodes[3] = lattice.index(i0[0] + 1, i0[1] + 1);
  weights[0] = (1.0 - fx) * (1.0 - fy);
  weights[1] = fx * (1.0 - fy);
  weights[2] = (1.0 - fx) * fy;
  weights[3] = fx * fy;
  return 4;
}

double interpolate(const Lattice& lattice, const Eigen::Ref<const Eigen::VectorXd>& slice,
                   const Eigen::Ref<const Eigen::VectorXd>& x, GridDiagnostics* diag) {
  std::array<int, 4> nodes{};
  std::array<double, 4> weights{};
  bool clamped = false;
  const int k = interpolation_stencil(lattice, x, nodes, weights, clamped);
  double v = 0.0;
  for (int i = 0; i < k; ++i) v += weights[static_cast<std::size_t>(i)] * slice(nodes[static_cast<std::size_t>(i)]);
  if (diag) {
    ++diag->interpolations;
    if (clamped) ++diag->clamped_targets;
  }
  return v;
}

// ---------------------------------------------------------------- nonlocal operators

Eigen::SparseMatrix<double, Eigen::RowMajor> jump_operator(double t, const MarketModel& model,
                                                           const Lattice& lattice, GridDiagnostics* diag) {
  const int N = lattice.size();
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<const JumpAtom*> atoms;
  for (const auto& atom : model.nu.atoms)
    if (atom.moves_factors()) atoms.push_back(&atom);
  triplets.reserve(static_cast<std::size_t>(N) * (atoms.size() * 4 + 1));

  Eigen::VectorXd xi(model.n());
  std::array<int, 4> nodes{};
  std::array<double, 4> weights{};
  for (int node = 0; node < N; ++node) {
    const Eigen::VectorXd x = lattice.point(node);
    double total = 0.0;
    for (const JumpAtom* atom : atoms) {
      atom->xi.evaluate_into(t, x, xi);
      bool clamped = false;
      const int k = interpolation_stencil(lattice, x + xi, nodes, weights, clamped);
      for (int i = 0; i < k; ++i)
        if (weights[static_cast<std::size_t>(i)] != 0.0)
          triplets.emplace_back(node, nodes[static_cast<std::size_t>(i)],
                                atom->lambda * weights[static_cast<std::size_t>(i)]);
      total += atom->lambda;
      if (diag) {
        ++diag->interpolations;
        if (clamped) ++diag->clamped_targets;
      }
    }
    if (total != 0.0) triplets.emplace_back(node, node, -total);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> J(N, N);
  J.setFromTriplets(triplets.begin(), triplets.end());
  return J;
}

Eigen::VectorXd nonlocal_d_a(const Eigen::Ref<const Eigen::VectorXd>& slice, double t, const MarketModel& model,
                             const Lattice& lattice, GridDiagnostics* diag) {
  return jump_operator(t, model, lattice, diag) * slice;
}

Eigen::VectorXd nonlocal_I_NL(const Eigen::Ref<const Eigen::VectorXd>& slice, const Eigen::MatrixXd& p, double t,
                              const MarketModel& model, const Lattice& lattice, GridDiagnostics* diag) {
  const int N = lattice.size();
  const double theta = model.theta;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd xi(model.n());
  for (int node = 0; node < N; ++node) {
    const Eigen::VectorXd x = lattice.point(node);
    bool overflow = false;
    for (const auto& atom : model.nu.atoms) {
      if (!atom.moves_factors()) continue;
      atom.xi.evaluate_into(t, x, xi);
      const double du = interpolate(lattice, slice, x + xi, diag) - slice(node);
      double arg = -theta * du;
      if (std::abs(arg) > kExpLimit) {
        arg = std::copysign(kExpLimit, arg);
        overflow = true;
      }
      out(node) += atom.lambda * (-(std::exp(arg) - 1.0) / theta - xi.dot(p.col(node)));
    }
    if (overflow && diag) ++diag->overflow_nodes;
  }
  return out;
}

// ---------------------------------------------------------------- stencils

Eigen::MatrixXd gradient(const Eigen::Ref<const Eigen::VectorXd>& slice, const Lattice& lattice) {
  Eigen::MatrixXd out(lattice.n(), lattice.size());
  for (int a = 0; a < lattice.n(); ++a) out.row(a) = axis_derivative(slice, lattice, a).transpose();
  return out;
}

Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& slice, const Lattice& lattice) {
  const int n = lattice.n();
  Eigen::MatrixXd out(n * n, lattice.size());
  for (int a = 0; a < n; ++a) out.row(a * n + a) = axis_second_derivative(slice, lattice, a).transpose();
  if (n == 2) {
    const Eigen::VectorXd d0 = axis_derivative(slice, lattice, 0);
    const Eigen::VectorXd d1 = axis_derivative(slice, lattice, 1);
    const Eigen::VectorXd mixed =
        0.5 * (axis_derivative(d0, lattice, 1) + axis_derivative(d1, lattice, 0));
    out.row(1) = mixed.transpose();
    out.row(2) = mixed.transpose();
  }
  return out;
}

// ---------------------------------------------------------------- serialization

nlohmann::json lattice_to_json(const Lattice& lattice) {
  nlohmann::json j;
  j["n"] = lattice.n();
  j["lower"] = std::vector<double>(lattice.lower().data(), lattice.lower().data() + lattice.n());
  j["upper"] = std::vector<double>(lattice.upper().data(), lattice.upper().data() + lattice.n());
  std::vector<int> nodes;
  for (int a = 0; a < lattice.n(); ++a) nodes.push_back(lattice.nodes(a));
  j["nodes"] = nodes;
  j["time_steps"] = lattice.time_steps();
  j["T"] = lattice.T();
  j["dt"] = lattice.dt();
  j["dx"] = std::vector<double>(lattice.spacing().data(), lattice.spacing().data() + lattice.n());
  return j;
}

Lattice lattice_from_json(const nlohmann::json& j) {
  try {
    const auto lo = j.at("lower").get<std::vector<double>>();
    const auto hi = j.at("upper").get<std::vector<double>>();
    return Lattice(Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                   Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())),
                   j.at("nodes").get<std::vector<int>>(), j.at("time_steps").get<int>(), j.at("T").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("lattice metadata: ") + e.what());
  }
}

void write_value_csv(std::ostream& os, const ValueField& field, const Lattice& lattice, int time_index) {
  os << "t";
  for (int a = 0; a < lattice.n(); ++a) os << ",x" << a;
  os << ",value\n";
  const int k0 = time_index >= 0 ? time_index : 0;
  const int k1 = time_index >= 0 ? time_index : lattice.time_steps();
  for (int k = k0; k <= k1; ++k) {
    const std::string t = num(lattice.time(k));
    for (int node = 0; node < lattice.size(); ++node) {
      os << t;
      for (int a = 0; a < lattice.n(); ++a) os << ',' << num(lattice.coord(node, a));
      os << ',' << num(field.values(k, node)) << '\n';
    }
  }
}

void write_policy_csv(std::ostream& os, const PolicyField& field, const Lattice& lattice, int time_index) {
  os << "t";
  for (int a = 0; a < lattice.n(); ++a) os << ",x" << a;
  for (int i = 0; i < field.m(); ++i) os << ",h" << i;
  os << '\n';
  const int k0 = time_index >= 0 ? time_index : 0;
  const int k1 = time_index >= 0 ? time_index : lattice.time_steps();
  for (int k = k0; k <= k1; ++k) {
    const std::string t = num(lattice.time(k));
    const auto& hk = field.h[static_cast<std::size_t>(k)];
    for (int node = 0; node < lattice.size(); ++node) {
      os << t;
      for (int a = 0; a < lattice.n(); ++a) os << ',' << num(lattice.coord(node, a));
      for (int i = 0; i < field.m(); ++i) os << ',' << num(hk(i, node));
      os << '\n';
    }
  }
}

ValueField read_value_csv(std::istream& is, const Lattice& lattice, ValueKind kind) {
  ValueField field;
  field.kind = kind;
  field.values.resize(lattice.time_steps() + 1, lattice.size());
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "value CSV is empty");
  const std::size_t cols = static_cast<std::size_t>(lattice.n()) + 2;
  std::size_t line_no = 1;
  for (int k = 0; k <= lattice.time_steps(); ++k) {
    for (int node = 0; node < lattice.size(); ++node) {
      if (!std::getline(is, line))
        throw Error(ErrorCode::ParseError, "value CSV ends early at line " + std::to_string(line_no + 1));
      ++line_no;
      const auto row = split_numbers(line, cols, line_no);
      check_coordinates(row, lattice, k, node, line_no);
      field.values(k, node) = row.back();
    }
  }
  return field;
}

PolicyField read_policy_csv(std::istream& is, const Lattice& lattice, int m) {
  PolicyField field;
  field.h.assign(static_cast<std::size_t>(lattice.time_steps()) + 1, Eigen::MatrixXd(m, lattice.size()));
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "policy CSV is empty");
  const std::size_t cols = static_cast<std::size_t>(lattice.n() + m) + 1;
  std::size_t line_no = 1;
  for (int k = 0; k <= lattice.time_steps(); ++k) {
    for (int node = 0; node < lattice.size(); ++node) {
      if (!std::getline(is, line))
        throw Error(ErrorCode::ParseError, "policy CSV ends early at line " + std::to_string(line_no + 1));
      ++line_no;
      const auto row = split_numbers(line, cols, line_no);
      check_coordinates(row, lattice, k, node, line_no);
      for (int i = 0; i < m; ++i)
        field.h[static_cast<std::size_t>(k)](i, node) = row[static_cast<std::size_t>(lattice.n() + 1 + i)];
    }
  }
  return field;
}

}  // namespace riskhjb
