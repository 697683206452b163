#include "riskhjb/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "riskhjb/convex.hpp"

namespace riskhjb {

namespace {

Eigen::VectorXd flatten_row_major(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r * m.cols() + c) = m(r, c);
  return out;
}

double radical_inverse(unsigned index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * (index % base);
    index /= base;
    f /= base;
  }
  return result;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13};

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  if (sym.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- CoefficientFn

CoefficientFn CoefficientFn::constant(const Eigen::MatrixXd& value) {
  CoefficientFn f;
  f.family_ = CoefficientFamily::Constant;
  f.rows_ = value.rows();
  f.cols_ = value.cols();
  f.base_ = flatten_row_major(value);
  f.state_slope_ = Eigen::MatrixXd(value.size(), 0);
  f.time_slope_ = Eigen::VectorXd::Zero(value.size());
  return f;
}

CoefficientFn CoefficientFn::affine(const Eigen::MatrixXd& value, const Eigen::MatrixXd& state_slope,
                                    const Eigen::VectorXd& time_slope) {
  if (state_slope.rows() != value.size())
    throw Error(ErrorCode::DimensionMismatch, "affine coefficient: state slope needs one row per entry");
  if (time_slope.size() != 0 && time_slope.size() != value.size())
    throw Error(ErrorCode::DimensionMismatch, "affine coefficient: time slope needs one entry per entry");
  CoefficientFn f;
  f.family_ = CoefficientFamily::Affine;
  f.rows_ = value.rows();
  f.cols_ = value.cols();
  f.base_ = flatten_row_major(value);
  f.state_slope_ = state_slope;
  f.time_slope_ = time_slope.size() ? time_slope : Eigen::VectorXd::Zero(value.size());
  return f;
}

CoefficientFn CoefficientFn::affine_saturated(const Eigen::MatrixXd& value,
                                              const Eigen::MatrixXd& state_slope,
                                              const Eigen::VectorXd& time_slope,
                                              const Eigen::VectorXd& lower,
                                              const Eigen::VectorXd& upper) {
  CoefficientFn f = affine(value, state_slope, time_slope);
  if (lower.size() != value.size() || upper.size() != value.size())
    throw Error(ErrorCode::DimensionMismatch, "saturated coefficient: caps need one entry per entry");
  if ((lower.array() > upper.array()).any())
    throw Error(ErrorCode::InvalidArgument, "saturated coefficient: lower cap above upper cap");
  f.family_ = CoefficientFamily::AffineSaturated;
  f.lower_ = lower;
  f.upper_ = upper;
  return f;
}

void CoefficientFn::evaluate_into(double t, const Eigen::Ref<const Eigen::VectorXd>& x,
                                  Eigen::Ref<Eigen::VectorXd> out) const {
  out = base_;
  if (family_ == CoefficientFamily::Constant) return;
  out.noalias() += t * time_slope_;
  if (state_slope_.cols() > 0) out.noalias() += state_slope_ * x;
  if (family_ == CoefficientFamily::AffineSaturated) out = out.cwiseMax(lower_).cwiseMin(upper_);
}

Eigen::MatrixXd CoefficientFn::operator()(double t, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd flat(size());
  evaluate_into(t, x, flat);
  Eigen::MatrixXd out(rows_, cols_);
  for (Eigen::Index r = 0; r < rows_; ++r)
    for (Eigen::Index c = 0; c < cols_; ++c) out(r, c) = flat(r * cols_ + c);
  return out;
}

double CoefficientFn::scalar(double t, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double v = base_(0);
  if (family_ == CoefficientFamily::Constant) return v;
  v += t * time_slope_(0);
  if (state_slope_.cols() > 0) v += state_slope_.row(0).dot(x);
  if (family_ == CoefficientFamily::AffineSaturated) v = std::clamp(v, lower_(0), upper_(0));
  return v;
}

double CoefficientFn::lipschitz_constant() const {
  if (family_ == CoefficientFamily::Constant) return 0.0;
  const double ks = state_slope_.cols() > 0 ? state_slope_.norm() : 0.0;
  return std::max(ks, time_slope_.norm());
}

bool CoefficientFn::is_identically_zero() const {
  if (size() == 0) return true;
  if (family_ == CoefficientFamily::Constant) return (base_.array() == 0.0).all();
  const bool affine_zero = (base_.array() == 0.0).all() && (time_slope_.array() == 0.0).all() &&
                           (state_slope_.array() == 0.0).all();
  if (!affine_zero) return false;
  if (family_ == CoefficientFamily::AffineSaturated)
    return (lower_.array() <= 0.0).all() && (upper_.array() >= 0.0).all();
  return true;
}

double CoefficientFn::sup_abs_on_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double T) const {
  if (size() == 0) return 0.0;
  const Eigen::Index n = state_dim();
  double best = 0.0;
  Eigen::VectorXd value(size());
  const unsigned corners = 1u << static_cast<unsigned>(n);
  for (int tc = 0; tc < 2; ++tc) {
    for (unsigned c = 0; c < corners; ++c) {
      Eigen::VectorXd x(n);
      for (Eigen::Index i = 0; i < n; ++i) x(i) = (c >> i) & 1u ? hi(i) : lo(i);
      evaluate_into(tc ? T : 0.0, x, value);
      best = std::max(best, value.cwiseAbs().maxCoeff());
    }
  }
  return best;
}

// ---------------------------------------------------------------- jumps

JumpAtom JumpAtom::factor(double lambda, CoefficientFn xi, Eigen::Index m) {
  return JumpAtom{lambda, Eigen::VectorXd::Zero(m), std::move(xi)};
}

JumpAtom JumpAtom::asset(double lambda, Eigen::VectorXd gamma) {
  return JumpAtom{lambda, std::move(gamma), CoefficientFn()};
}

double JumpMeasure::total_intensity() const {
  double total = 0.0;
  for (const auto& atom : atoms) total += atom.lambda;
  return total;
}

// ---------------------------------------------------------------- local evaluation

void LocalCoefficients::assign(const MarketModel& model, double t_, const Eigen::Ref<const Eigen::VectorXd>& x_) {
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  const Eigen::Index M = model.M();
  t = t_;
  theta = model.theta;
  x = x_;

  a0 = model.assets.a0.scalar(t, x);
  a_hat.resize(m);
  model.assets.a.evaluate_into(t, x, a_hat);
  a_hat.array() -= a0;
  b.resize(n);
  model.factor.b.evaluate_into(t, x, b);

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  scratch.resize(std::max(m, n) * M);
  model.assets.Sigma.evaluate_into(t, x, scratch.head(m * M));
  Sigma = Eigen::Map<const RowMajor>(scratch.data(), m, M);
  model.factor.Lambda.evaluate_into(t, x, scratch.head(n * M));
  Lambda = Eigen::Map<const RowMajor>(scratch.data(), n, M);

  sigma_sigma.noalias() = Sigma * Sigma.transpose();
  lambda_lambda.noalias() = Lambda * Lambda.transpose();
  sigma_lambda.noalias() = Sigma * Lambda.transpose();

  const std::size_t J = model.nu.atoms.size();
  intensity.resize(static_cast<Eigen::Index>(J));
  xi.resize(J);
  gamma.resize(J);
  xi_compensator = Eigen::VectorXd::Zero(n);
  for (std::size_t j = 0; j < J; ++j) {
    const JumpAtom& atom = model.nu.atoms[j];
    intensity(static_cast<Eigen::Index>(j)) = atom.lambda;
    xi[j].resize(n);
    if (atom.xi.size() > 0) {
      atom.xi.evaluate_into(t, x, xi[j]);
    } else {
      xi[j].setZero();
    }
    gamma[j] = atom.gamma.size() ? atom.gamma : Eigen::VectorXd::Zero(m);
    xi_compensator += atom.lambda * xi[j];
  }
}

// ---------------------------------------------------------------- validation

void check_dimensions(const MarketModel& model) {
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  const Eigen::Index M = model.M();
  auto expect = [&](const CoefficientFn& f, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (f.rows() != rows || f.cols() != cols) {
      std::ostringstream os;
      os << name << " is " << f.rows() << "x" << f.cols() << ", expected " << rows << "x" << cols;
      throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (f.state_dim() != 0 && f.state_dim() != n) {
      std::ostringstream os;
      os << name << " depends on " << f.state_dim() << " factors, model has " << n;
      throw Error(ErrorCode::DimensionMismatch, os.str());
    }
  };
  if (n < 1 || m < 1) throw Error(ErrorCode::DimensionMismatch, "need n >= 1 and m >= 1");
  expect(model.factor.b, n, 1, "b");
  expect(model.factor.Lambda, n, M, "Lambda");
  expect(model.assets.a0, 1, 1, "a0");
  expect(model.assets.a, m, 1, "a");
  expect(model.assets.Sigma, m, M, "Sigma");
  for (std::size_t j = 0; j < model.nu.atoms.size(); ++j) {
    const JumpAtom& atom = model.nu.atoms[j];
    if (atom.gamma.size() != 0 && atom.gamma.size() != m)
      throw Error(ErrorCode::DimensionMismatch, "atom " + std::to_string(j) + ": gamma must have m entries");
    if (atom.xi.size() != 0) expect(atom.xi, n, 1, "xi");
  }
  const auto& c = model.constraints;
  if (c.Upsilon.size() != 0 || c.upsilon.size() != 0) {
    if (c.Upsilon.rows() != m || c.Upsilon.cols() != c.upsilon.size())
      throw Error(ErrorCode::DimensionMismatch, "Upsilon must be m x r with r = len(upsilon)");
  }
}

bool ValidationReport::accepted() const {
  return std::none_of(checks.begin(), checks.end(),
                      [](const AssumptionCheck& c) { return c.blocking && !c.passed; });
}

std::optional<ErrorCode> ValidationReport::first_failure() const {
  for (const auto& c : checks)
    if (c.blocking && !c.passed) return c.failure;
  return std::nullopt;
}

void require_valid(const ValidationReport& report) {
  for (const auto& c : report.checks)
    if (c.blocking && !c.passed) throw Error(c.failure.value_or(ErrorCode::InvalidArgument), c.detail);
}

ValidationReport validate_model(const MarketModel& model, const ProbeSpec& probe) {
  check_dimensions(model);
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  ValidationReport report;

  {
    AssumptionCheck c;
    c.id = "risk_aversion";
    c.assumption = "theta > 0, T > 0";
    c.passed = model.theta > 0.0 && std::isfinite(model.theta) && model.T > 0.0 && std::isfinite(model.T);
    c.metric = model.theta;
    c.detail = "theta = " + fmt_double(model.theta) + ", T = " + fmt_double(model.T);
    if (!c.passed) c.failure = ErrorCode::InvalidArgument;
    report.checks.push_back(c);
  }

  // Probe points: quasi-random (Halton) over [0,T] x box plus the supplied nodes.
  std::vector<std::pair<double, Eigen::VectorXd>> points;
  Eigen::VectorXd lo = probe.lower.size() == n ? probe.lower : Eigen::VectorXd::Constant(n, -1.0);
  Eigen::VectorXd hi = probe.upper.size() == n ? probe.upper : Eigen::VectorXd::Constant(n, 1.0);
  for (int k = 0; k < probe.quasi_random_points; ++k) {
    const unsigned idx = static_cast<unsigned>(k) + 1;
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i)
      x(i) = lo(i) + (hi(i) - lo(i)) * radical_inverse(idx, kPrimes[(i + 1) % 6]);
    points.emplace_back(model.T * radical_inverse(idx, kPrimes[0]), x);
  }
  for (const auto& x : probe.extra_points) {
    points.emplace_back(0.0, x);
    points.emplace_back(model.T, x);
  }

  double min_ll = std::numeric_limits<double>::infinity();
  double min_ss = std::numeric_limits<double>::infinity();
  LocalCoefficients local;
  for (const auto& [t, x] : points) {
    local.assign(model, t, x);
    min_ll = std::min(min_ll, min_eigenvalue(local.lambda_lambda));
    min_ss = std::min(min_ss, min_eigenvalue(local.sigma_sigma));
  }
  report.min_eig_factor_diffusion = min_ll;
  report.min_eig_asset_diffusion = min_ss;
  {
    AssumptionCheck c;
    c.id = "factor_ellipticity";
    c.assumption = "factor diffusion uniformly elliptic";
    c.passed = min_ll > 0.0;
    c.metric = min_ll;
    c.detail = "min eigenvalue of Lambda Lambda' over " + std::to_string(points.size()) +
               " probes = " + fmt_double(min_ll);
    if (!c.passed) c.failure = ErrorCode::EllipticityViolation;
    report.checks.push_back(c);
  }
  {
    AssumptionCheck c;
    c.id = "asset_ellipticity";
    c.assumption = "asset diffusion uniformly elliptic";
    c.passed = min_ss > 0.0;
    c.metric = min_ss;
    c.detail = "min eigenvalue of Sigma Sigma' over " + std::to_string(points.size()) +
               " probes = " + fmt_double(min_ss);
    if (!c.passed) c.failure = ErrorCode::EllipticityViolation;
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c;
    c.id = "finite_activity";
    c.assumption = "finite jump measure";
    c.passed = true;
    for (const auto& atom : model.nu.atoms)
      if (!(atom.lambda > 0.0) || !std::isfinite(atom.lambda)) c.passed = false;
    c.metric = model.nu.total_intensity();
    c.detail = "total intensity " + fmt_double(c.metric);
    if (!c.passed) {
      c.failure = ErrorCode::InvalidArgument;
      c.detail += " (every atom needs 0 < lambda < inf)";
    }
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c;
    c.id = "simultaneous_jumps";
    c.assumption = "no simultaneous factor and asset jumps";
    std::vector<std::size_t> offenders;
    for (std::size_t j = 0; j < model.nu.atoms.size(); ++j)
      if (model.nu.atoms[j].moves_assets() && model.nu.atoms[j].moves_factors()) offenders.push_back(j);
    c.passed = offenders.empty();
    c.metric = static_cast<double>(offenders.size());
    if (c.passed) {
      c.detail = "no atom moves factors and assets together";
    } else {
      c.detail = "simultaneous factor and asset jump: atom(s)";
      for (auto j : offenders) c.detail += " " + std::to_string(j);
      c.detail += " carry both gamma and xi";
      c.failure = ErrorCode::SimultaneousJump;
    }
    report.checks.push_back(c);
  }

  Eigen::VectorXd gmin = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd gmax = Eigen::VectorXd::Zero(m);
  for (const auto& atom : model.nu.atoms) {
    if (!atom.moves_assets()) continue;
    gmin = gmin.cwiseMin(atom.gamma);
    gmax = gmax.cwiseMax(atom.gamma);
  }
  {
    AssumptionCheck c;
    c.id = "asset_jump_floor";
    c.assumption = "asset jump marks >= -1";
    c.passed = m == 0 || gmin.minCoeff() >= -1.0;
    c.metric = m ? gmin.minCoeff() : 0.0;
    c.detail = "smallest asset jump mark " + fmt_double(c.metric);
    if (!c.passed) c.failure = ErrorCode::InvalidArgument;
    report.checks.push_back(c);
  }
  {
    AssumptionCheck c;
    c.id = "asset_jump_span";
    c.assumption = "asset jump marks span both signs";
    c.blocking = false;
    c.passed = (gmin.array() < 0.0).all() && (gmax.array() > 0.0).all();
    c.metric = c.passed ? 1.0 : 0.0;
    c.detail = c.passed ? "asset jump marks span both signs on every axis"
                        : "asset jump marks do not span both signs; J0 is unbounded on some axis "
                          "(informational, the quadratic term still bounds the optimum)";
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c;
    c.id = "constraint_interior";
    c.assumption = "constraint polytope has nonempty interior";
    const auto& cs = model.constraints;
    double margin = 1.0;
    if (cs.Upsilon.cols() > 0) margin = find_interior_point(cs.Upsilon.transpose(), cs.upsilon).margin;
    report.constraint_margin = margin;
    c.passed = margin > 1e-9;
    c.metric = margin;
    c.detail = "largest inscribed margin of {y : Upsilon' y <= upsilon} = " + fmt_double(margin);
    if (!c.passed) c.failure = ErrorCode::EmptyConstraintInterior;
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c;
    c.id = "bounded_coefficients";
    c.assumption = "bounded coefficients";
    c.blocking = false;
    std::vector<std::string> unbounded;
    auto probe_family = [&](const CoefficientFn& f, const std::string& name) {
      if (f.family() == CoefficientFamily::Affine && f.lipschitz_constant() > 0.0 &&
          f.state_slope().cols() > 0 && f.state_slope().norm() > 0.0)
        unbounded.push_back(name);
    };
    probe_family(model.factor.b, "b");
    probe_family(model.factor.Lambda, "Lambda");
    probe_family(model.assets.a0, "a0");
    probe_family(model.assets.a, "a");
    probe_family(model.assets.Sigma, "Sigma");
    c.passed = unbounded.empty();
    c.detail = c.passed ? "all coefficients constant or saturated" : "unsaturated affine coefficients:";
    for (const auto& name : unbounded) c.detail += " " + name;
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c;
    c.id = "lipschitz";
    c.assumption = "Lipschitz coefficients";
    c.blocking = false;
    double k = 0.0;
    for (const CoefficientFn* f : {&model.factor.b, &model.factor.Lambda, &model.assets.a0, &model.assets.a,
                                   &model.assets.Sigma})
      k = std::max(k, f->lipschitz_constant());
    for (const auto& atom : model.nu.atoms) k = std::max(k, atom.xi.lipschitz_constant());
    c.metric = k;
    c.detail = "largest coefficient Lipschitz constant " + fmt_double(k);
    report.checks.push_back(c);
  }
  return report;
}

bool feasible_region_membership(const MarketModel& model, const Eigen::Ref<const Eigen::VectorXd>& h,
                                double /*t*/) {
  const auto& c = model.constraints;
  if (c.Upsilon.cols() > 0 && ((c.Upsilon.transpose() * h - c.upsilon).array() > 0.0).any()) return false;
  return jump_margin(model, h) > 0.0;
}

double jump_margin(const MarketModel& model, const Eigen::Ref<const Eigen::VectorXd>& h) {
  double margin = 1.0;
  for (const auto& atom : model.nu.atoms)
    if (atom.moves_assets()) margin = std::min(margin, 1.0 + h.dot(atom.gamma));
  return margin;
}

double short_rate_bound(const MarketModel& model, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return model.assets.a0.sup_abs_on_box(lo, hi, model.T);
}

}  // namespace riskhjb
