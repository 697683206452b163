#include "riskhjb/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace riskhjb {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

bool row_is_independent(const Eigen::MatrixXd& A, const std::vector<int>& working, int k) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(working.size()) + 1, A.cols());
  for (std::size_t i = 0; i < working.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = A.row(working[i]);
  rows.row(rows.rows() - 1) = A.row(k);
  if (rows.rows() > A.cols()) return false;
  Eigen::FullPivHouseholderQR<Eigen::MatrixXd> qr(rows);
  qr.setThreshold(1e-10);
  return qr.rank() == rows.rows();
}

Eigen::MatrixXd working_rows(const Eigen::MatrixXd& A, const std::vector<int>& working) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(working.size()), A.cols());
  for (std::size_t i = 0; i < working.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = A.row(working[i]);
  return rows;
}

}  // namespace

ConstrainedMinimum minimize_convex(const ConvexObjective& objective, const Eigen::MatrixXd& A,
                                   const Eigen::VectorXd& b, const Eigen::VectorXd& start,
                                   double tol, int max_iter) {
  const Eigen::Index m = objective.dim();
  const Eigen::Index r = A.rows();
  Eigen::VectorXd h = start;

  auto slack = [&](Eigen::Index k) { return b(k) - A.row(k).dot(h); };

  std::vector<int> working;
  for (Eigen::Index k = 0; k < r; ++k) {
    if (slack(k) <= 1e-12 * (1.0 + std::abs(b(k))) && row_is_independent(A, working, static_cast<int>(k))) {
      working.push_back(static_cast<int>(k));
    }
  }

  ConstrainedMinimum out;
  Eigen::VectorXd grad(m);
  Eigen::MatrixXd hess(m, m);
  Eigen::VectorXd mu;
  double stationarity = 0.0;
  double floor = 0.0;
  double last_plain_stationarity = std::numeric_limits<double>::infinity();

  auto multipliers = [&](const Eigen::MatrixXd& AW) {
    if (AW.rows() == 0) {
      mu.resize(0);
      stationarity = grad.lpNorm<Eigen::Infinity>();
      return;
    }
    mu = AW.transpose().colPivHouseholderQr().solve(-grad);
    stationarity = (grad + AW.transpose() * mu).lpNorm<Eigen::Infinity>();
  };

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    objective.gradient_hessian(h, grad, hess);
    const Eigen::MatrixXd AW = working_rows(A, working);
    multipliers(AW);

    // Newton direction restricted to the null space of the working rows.
    const Eigen::Index w = AW.rows();
    Eigen::VectorXd d;
    if (w == 0) {
      d = hess.ldlt().solve(-grad);
    } else {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + w, m + w);
      K.topLeftCorner(m, m) = hess;
      K.topRightCorner(m, w) = AW.transpose();
      K.bottomLeftCorner(w, m) = AW;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + w);
      rhs.head(m) = -grad;
      d = K.fullPivLu().solve(rhs).head(m);
    }
    // When the predicted Newton decrease is below round-off of the objective
    // the line search cannot judge progress: take the plain Newton step, and
    // stop once such a step no longer reduces stationarity.
    const double slope = grad.dot(d);
    const bool below_roundoff = stationarity <= 1e3 * tol &&
                                -slope <= 16.0 * kEps * std::max(1.0, std::abs(objective.value(h)));
    const bool stalled = below_roundoff && stationarity >= last_plain_stationarity;
    if (stalled) floor = std::max(floor, stationarity);
    last_plain_stationarity = below_roundoff ? stationarity : std::numeric_limits<double>::infinity();

    if (stationarity <= tol || stalled) {
      Eigen::Index worst = -1;
      double worst_mu = -tol;
      for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (mu(i) < worst_mu) {
          worst_mu = mu(i);
          worst = i;
        }
      }
      if (worst < 0) {
        out.converged = true;
        break;
      }
      working.erase(working.begin() + worst);
      continue;
    }
    if (!(slope < 0.0)) break;

    double step_max = 1.0;
    int blocking = -1;
    const double dnorm = d.norm();
    for (Eigen::Index k = 0; k < r; ++k) {
      if (std::find(working.begin(), working.end(), static_cast<int>(k)) != working.end()) continue;
      const double ad = A.row(k).dot(d);
      if (ad <= 1e-14 * (A.row(k).norm() * dnorm)) continue;
      const double ratio = std::max(slack(k), 0.0) / ad;
      if (ratio < step_max) {
        step_max = ratio;
        blocking = static_cast<int>(k);
      }
    }
    const double domain_limit = 0.995 * objective.domain_step_limit(h, d);
    if (domain_limit < step_max) {
      step_max = domain_limit;
      blocking = -1;
    }

    if (below_roundoff) {
      h += step_max * d;
      if (blocking >= 0) working.push_back(blocking);
      continue;
    }

    const double f0 = objective.value(h);
    double step = step_max;
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      Eigen::VectorXd trial = h + step * d;
      if (objective.in_domain(trial) && objective.value(trial) <= f0 + 1e-4 * step * slope) {
        h = std::move(trial);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Armijo can fail only at round-off level; keep h and stop.
      if (step_max == 0.0 && blocking >= 0) {
        working.push_back(blocking);
        continue;
      }
      break;
    }
    if (blocking >= 0 && step == step_max) working.push_back(blocking);
  }

  objective.gradient_hessian(h, grad, hess);
  multipliers(working_rows(A, working));
  double residual = stationarity;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    residual = std::max(residual, -mu(i));
    residual = std::max(residual, std::abs(mu(i) * slack(working[static_cast<std::size_t>(i)])));
  }
  for (Eigen::Index k = 0; k < r; ++k) residual = std::max(residual, -slack(k));

  out.h = h;
  out.value = objective.value(h);
  out.kkt_residual = residual;
  out.active_set = working;
  std::sort(out.active_set.begin(), out.active_set.end());
  out.multipliers = Eigen::VectorXd(static_cast<Eigen::Index>(working.size()));
  for (std::size_t i = 0; i < out.active_set.size(); ++i) {
    const auto pos = std::find(working.begin(), working.end(), out.active_set[i]) - working.begin();
    out.multipliers(static_cast<Eigen::Index>(i)) = mu(pos);
  }
  out.iterations = iter;
  out.converged = out.converged && residual <= std::max(tol, floor);
  return out;
}

InteriorPoint find_interior_point(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                  double box_radius) {
  const Eigen::Index m = A.cols();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index k = 0; k < A.rows(); ++k) {
    if (A.row(k).norm() > 1e-14) {
      rows.push_back(k);
    } else if (b(k) < 0.0) {
      return {Eigen::VectorXd::Zero(m), b(k)};
    }
  }

  // Variables z = (y, s); maximise s subject to the normalised rows shifted by s.
  const Eigen::Index q = static_cast<Eigen::Index>(rows.size()) + 2 * m + 1;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(q, m + 1);
  Eigen::VectorXd d(q);
  Eigen::Index row = 0;
  double s0 = 1.0;
  for (Eigen::Index k : rows) {
    const double norm = A.row(k).norm();
    C.row(row).head(m) = A.row(k) / norm;
    C(row, m) = 1.0;
    d(row) = b(k) / norm;
    s0 = std::min(s0, d(row));
    ++row;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    C(row, i) = 1.0;
    d(row++) = box_radius;
    C(row, i) = -1.0;
    d(row++) = box_radius;
  }
  C(row, m) = 1.0;
  d(row) = 1.0;

  Eigen::VectorXd z = Eigen::VectorXd::Zero(m + 1);
  z(m) = s0 - 1.0;

  auto barrier = [&](const Eigen::VectorXd& zz, double t) {
    const Eigen::VectorXd sl = d - C * zz;
    if ((sl.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    return -t * zz(m) - sl.array().log().sum();
  };

  double t = 1.0;
  for (int outer = 0; outer < 60; ++outer) {
    for (int inner = 0; inner < 200; ++inner) {
      const Eigen::VectorXd sl = d - C * z;
      const Eigen::VectorXd inv = sl.cwiseInverse();
      Eigen::VectorXd grad = C.transpose() * inv;
      grad(m) -= t;
      const Eigen::MatrixXd H = C.transpose() * inv.cwiseAbs2().asDiagonal() * C;
      const Eigen::VectorXd dz = H.ldlt().solve(-grad);
      const double dec = -grad.dot(dz);
      if (dec < 1e-14) break;
      double step = 1.0;
      const double f0 = barrier(z, t);
      while (barrier(z + step * dz, t) > f0 - 0.25 * step * dec && step > 1e-16) step *= 0.5;
      z += step * dz;
    }
    if (static_cast<double>(q) / t < 1e-12) break;
    t *= 20.0;
  }
  return {z.head(m), z(m)};
}

}  // namespace riskhjb
