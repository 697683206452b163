#include "riskhjb/montecarlo.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

#include "riskhjb/hamiltonian.hpp"

namespace riskhjb {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, long long stream) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream) + 0x5851F42D4C957F2Dull));
}

template <class Fn>
void parallel_for(long long count, int threads, Fn&& fn) {
  const int workers = static_cast<int>(std::min<long long>(std::max(threads, 1), std::max(count, 1LL)));
  if (workers <= 1) {
    for (long long i = 0; i < count; ++i) fn(i);
    return;
  }
  constexpr long long kBlock = 256;
  std::atomic<long long> next{0};
  auto work = [&] {
    for (;;) {
      const long long start = next.fetch_add(kBlock);
      if (start >= count) return;
      const long long stop = std::min(count, start + kBlock);
      for (long long i = start; i < stop; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

struct PathResult {
  double ln_chi = 0.0;
  double int_g = 0.0;
  double ln_v = 0.0;
  long long clamped = 0;
  long long steps = 0;
};

// Per-step contributions shared by the in-loop engine and bundle replay.
struct StepAccumulator {
  const MarketModel& model;
  Eigen::VectorXd sig_h;  // Sigma' h, size M

  explicit StepAccumulator(const MarketModel& m) : model(m), sig_h(m.M()) {}

  void step(const LocalCoefficients& c, const Eigen::VectorXd& h, double dt, const Eigen::VectorXd& dW,
            PathResult& r) {
    const double theta = c.theta;
    sig_h.noalias() = c.Sigma.transpose() * h;
    const double quad = sig_h.squaredNorm();
    const double noise = sig_h.dot(dW);
    double jump_drift_v = 0.0;
    double jump_drift_chi = 0.0;
    for (std::size_t j = 0; j < c.gamma.size(); ++j) {
      const double hg = h.dot(c.gamma[j]);
      if (hg == 0.0) continue;
      const double lam = c.intensity(static_cast<Eigen::Index>(j));
      jump_drift_v += lam * hg;
      jump_drift_chi += lam * (1.0 - std::pow(1.0 + hg, -theta));
    }
    r.int_g += g(c, h) * dt;
    r.ln_chi += -theta * noise - 0.5 * theta * theta * quad * dt + jump_drift_chi * dt;
    r.ln_v += (c.a0 + h.dot(c.a_hat) - 0.5 * quad - jump_drift_v) * dt + noise;
  }

  static void asset_jump(const LocalCoefficients& c, const Eigen::VectorXd& h, int atom, PathResult& r) {
    const double base = 1.0 + h.dot(c.gamma[static_cast<std::size_t>(atom)]);
    if (!(base > 0.0)) {
      r.ln_v = r.ln_chi = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    r.ln_v += std::log(base);
    r.ln_chi += -c.theta * std::log(base);
  }
};

// Simulates one path; if `record` is set the path data is stored as well.
class PathEngine {
 public:
  PathEngine(const MarketModel& model, const Policy& policy, Measure measure, double t0, double dt)
      : model_(model), policy_(policy), measure_(measure), t0_(t0), acc_(model) {
    if (!(t0 >= 0.0 && t0 < model.T)) throw Error(ErrorCode::InvalidArgument, "t0 must lie in [0, T)");
    if (!(dt > 0.0 && dt <= model.T / 50.0 * (1.0 + 1e-12)))
      throw Error(ErrorCode::InvalidArgument, "dt must lie in (0, T/50]");
    steps_ = std::max(1, static_cast<int>(std::ceil((model.T - t0) / dt - 1e-9)));
    grid_dt_ = (model.T - t0) / steps_;
    h_.resize(model.m());
    x_.resize(model.n());
    drift_.resize(model.n());
    dW_.resize(model.M());
    xi_.resize(model.n());
  }

  PathResult run(std::uint64_t seed, bool negate, const Eigen::VectorXd& x0, SimulatedPath* record) {
    std::mt19937_64 gen(seed);
    const double T = model_.T;
    // Jump clocks first, so that normals stay aligned across policies.
    jumps_.clear();
    for (std::size_t j = 0; j < model_.nu.atoms.size(); ++j) {
      const double lam = model_.nu.atoms[j].lambda;
      if (!(lam > 0.0)) continue;
      std::exponential_distribution<double> clock(lam);
      double t = t0_;
      for (;;) {
        t += clock(gen);
        if (t >= T) break;
        jumps_.emplace_back(t, static_cast<int>(j));
      }
    }
    std::sort(jumps_.begin(), jumps_.end());
    std::normal_distribution<double> normal;

    PathResult r;
    x_ = x0;
    double t = t0_;
    int grid_index = 1;
    std::size_t jp = 0;
    if (record) {
      record->times.assign(1, t0_);
      record->jumps.clear();
      rec_x_.assign(1, x0);
      rec_dw_.clear();
    }
    int step = 0;
    while (grid_index <= steps_) {
      const double grid_t = grid_index == steps_ ? T : t0_ + grid_index * grid_dt_;
      const bool jump_next = jp < jumps_.size() && jumps_[jp].first < grid_t;
      const double t_next = jump_next ? jumps_[jp].first : grid_t;
      const double dt = t_next - t;
      const double sq = std::sqrt(std::max(dt, 0.0));
      for (Eigen::Index i = 0; i < dW_.size(); ++i) {
        const double z = normal(gen);
        dW_(i) = (negate ? -z : z) * sq;
      }
      c_.assign(model_, t, x_);
      if (policy_.evaluate(t, x_, h_)) ++r.clamped;
      if (measure_ == Measure::P) {
        acc_.step(c_, h_, dt, dW_, r);
        drift_ = c_.b - c_.xi_compensator;
      } else {
        r.int_g += g(c_, h_) * dt;
        drift_.noalias() = c_.b - c_.xi_compensator - c_.theta * (c_.sigma_lambda.transpose() * h_);
      }
      x_ += drift_ * dt;
      x_.noalias() += c_.Lambda * dW_;
      ++r.steps;
      t = t_next;
      if (record) rec_dw_.push_back(dW_);
      if (jump_next) {
        const int atom = jumps_[jp].second;
        ++jp;
        const JumpAtom& a = model_.nu.atoms[static_cast<std::size_t>(atom)];
        if (a.moves_factors()) {
          a.xi.evaluate_into(t, x_, xi_);
          x_ += xi_;
          if (record) record->jumps.push_back({step, atom});
        } else if (a.moves_assets() && measure_ == Measure::P) {
          c_.assign(model_, t, x_);
          if (policy_.evaluate(t, x_, h_)) ++r.clamped;
          StepAccumulator::asset_jump(c_, h_, atom, r);
          if (record) record->jumps.push_back({step, atom});
        }
      } else {
        ++grid_index;
      }
      if (record) {
        record->times.push_back(t);
        rec_x_.push_back(x_);
      }
      ++step;
    }
    if (record) {
      record->X.resize(model_.n(), static_cast<Eigen::Index>(rec_x_.size()));
      for (std::size_t s = 0; s < rec_x_.size(); ++s) record->X.col(static_cast<Eigen::Index>(s)) = rec_x_[s];
      record->dW.resize(model_.M(), static_cast<Eigen::Index>(rec_dw_.size()));
      for (std::size_t s = 0; s < rec_dw_.size(); ++s) record->dW.col(static_cast<Eigen::Index>(s)) = rec_dw_[s];
      record->clamped_steps = r.clamped;
    }
    return r;
  }

 private:
  const MarketModel& model_;
  const Policy& policy_;
  Measure measure_;
  double t0_;
  int steps_ = 1;
  double grid_dt_ = 0.0;
  StepAccumulator acc_;
  LocalCoefficients c_;
  Eigen::VectorXd h_, x_, drift_, dW_, xi_;
  std::vector<std::pair<double, int>> jumps_;
  std::vector<Eigen::VectorXd> rec_x_, rec_dw_;
};

std::vector<PathResult> run_paths(const MarketModel& model, const Policy& policy, double t0,
                                  const Eigen::VectorXd& x0, const SimConfig& config, Measure measure) {
  if (config.paths < 1) throw Error(ErrorCode::InvalidArgument, "need at least one path");
  if (x0.size() != model.n()) throw Error(ErrorCode::DimensionMismatch, "x0 must have n entries");
  if (policy.m() != model.m()) throw Error(ErrorCode::DimensionMismatch, "policy must have m components");
  std::vector<PathResult> out(static_cast<std::size_t>(config.paths));
  const int threads = worker_threads(config.threads);
  const long long blocks = (config.paths + 255) / 256;
  parallel_for(blocks, threads, [&](long long b) {
    PathEngine engine(model, policy, measure, t0, config.dt);
    const long long stop = std::min(config.paths, (b + 1) * 256);
    for (long long p = b * 256; p < stop; ++p) {
      const long long stream = config.antithetic ? p / 2 : p;
      const bool negate = config.antithetic && (p % 2 == 1);
      out[static_cast<std::size_t>(p)] = engine.run(stream_seed(config.seed, stream), negate, x0, nullptr);
    }
  });
  return out;
}

// Mean and standard error of per-path samples; antithetic pairs are averaged first.
SimEstimate summarize(const std::vector<double>& samples, bool antithetic, Measure measure) {
  std::vector<double> values;
  values.reserve(samples.size());
  SimEstimate e;
  e.measure = measure;
  if (antithetic) {
    for (std::size_t i = 0; i + 1 < samples.size(); i += 2) {
      const double v = 0.5 * (samples[i] + samples[i + 1]);
      if (std::isfinite(v)) {
        values.push_back(v);
      } else {
        e.excluded_paths += 2;
      }
    }
  } else {
    for (double v : samples) {
      if (std::isfinite(v)) {
        values.push_back(v);
      } else {
        ++e.excluded_paths;
      }
    }
  }
  const std::size_t N = values.size();
  e.paths = static_cast<long long>(samples.size()) - e.excluded_paths;
  if (N == 0) {
    e.mean = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  e.mean = pairwise_sum(values.data(), N) / static_cast<double>(N);
  if (N > 1) {
    for (auto& v : values) v = (v - e.mean) * (v - e.mean);
    const double var = pairwise_sum(values.data(), N) / static_cast<double>(N - 1);
    e.std_error = std::sqrt(var / static_cast<double>(N));
  }
  return e;
}

void add_counts(SimEstimate& e, const std::vector<PathResult>& results) {
  for (const auto& r : results) {
    e.clamped_steps += r.clamped;
    e.path_steps += r.steps;
  }
}

PolicyField shrink_into_feasible(const MarketModel& model, const Lattice& lattice, const PolicyField& base,
                                 const PolicyField& target) {
  PolicyField out = target;
  for (std::size_t k = 0; k < out.h.size(); ++k) {
    const double t = lattice.time(static_cast<int>(k));
    for (Eigen::Index node = 0; node < out.h[k].cols(); ++node) {
      const Eigen::VectorXd h0 = base.h[k].col(node);
      const Eigen::VectorXd d = target.h[k].col(node) - h0;
      if (feasible_region_membership(model, h0 + d, t)) continue;
      double lo = 0.0;
      double hi = 1.0;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible_region_membership(model, h0 + mid * d, t) ? lo : hi) = mid;
      }
      out.h[k].col(node) = h0 + lo * d;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Policy

Policy Policy::constant(Eigen::VectorXd h) {
  Policy p;
  p.constant_ = std::move(h);
  return p;
}

Policy Policy::field(const PolicyField& field, const Lattice& lattice) {
  if (field.h.size() != static_cast<std::size_t>(lattice.time_steps()) + 1)
    throw Error(ErrorCode::DimensionMismatch, "policy field does not match the lattice");
  Policy p;
  p.field_ = &field;
  p.lattice_ = &lattice;
  return p;
}

Eigen::Index Policy::m() const { return field_ ? field_->m() : constant_.size(); }

bool Policy::evaluate(double t, const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const {
  if (!field_) {
    out = constant_;
    return false;
  }
  const int k = std::clamp(static_cast<int>(std::lround(t / lattice_->dt())), 0, lattice_->time_steps());
  std::array<int, 4> nodes{};
  std::array<double, 4> weights{};
  bool clamped = false;
  const int count = interpolation_stencil(*lattice_, x, nodes, weights, clamped);
  const Eigen::MatrixXd& hk = field_->h[static_cast<std::size_t>(k)];
  out.setZero();
  for (int i = 0; i < count; ++i) out += weights[static_cast<std::size_t>(i)] * hk.col(nodes[static_cast<std::size_t>(i)]);
  return clamped;
}

// ---------------------------------------------------------------- simulation

PathBundle simulate_factors(const MarketModel& model, const Policy& policy, const Eigen::VectorXd& x0, double t0,
                            const SimConfig& config) {
  if (x0.size() != model.n()) throw Error(ErrorCode::DimensionMismatch, "x0 must have n entries");
  PathBundle bundle;
  bundle.t0 = t0;
  bundle.x0 = x0;
  bundle.measure = config.measure;
  bundle.paths.resize(static_cast<std::size_t>(config.paths));
  PathEngine engine(model, policy, config.measure, t0, config.dt);
  for (long long p = 0; p < config.paths; ++p) {
    const long long stream = config.antithetic ? p / 2 : p;
    const bool negate = config.antithetic && (p % 2 == 1);
    engine.run(stream_seed(config.seed, stream), negate, x0, &bundle.paths[static_cast<std::size_t>(p)]);
  }
  return bundle;
}

std::vector<double> doleans_chi(const PathBundle& bundle, const Policy& policy, const MarketModel& model) {
  if (bundle.measure != Measure::P) throw Error(ErrorCode::InvalidArgument, "chi needs paths simulated under P");
  std::vector<double> out;
  out.reserve(bundle.paths.size());
  StepAccumulator acc(model);
  LocalCoefficients c;
  Eigen::VectorXd h(model.m());
  for (const auto& path : bundle.paths) {
    PathResult r;
    std::size_t jp = 0;
    const auto steps = static_cast<int>(path.times.size()) - 1;
    for (int s = 0; s < steps; ++s) {
      const double t = path.times[static_cast<std::size_t>(s)];
      c.assign(model, t, path.X.col(s));
      policy.evaluate(t, path.X.col(s), h);
      acc.step(c, h, path.times[static_cast<std::size_t>(s) + 1] - t, path.dW.col(s), r);
      while (jp < path.jumps.size() && path.jumps[jp].step == s) {
        const int atom = path.jumps[jp].atom;
        if (model.nu.atoms[static_cast<std::size_t>(atom)].moves_assets()) {
          const double tj = path.times[static_cast<std::size_t>(s) + 1];
          c.assign(model, tj, path.X.col(s + 1));
          policy.evaluate(tj, path.X.col(s + 1), h);
          StepAccumulator::asset_jump(c, h, atom, r);
        }
        ++jp;
      }
    }
    out.push_back(std::exp(r.ln_chi));
  }
  return out;
}

SimEstimate estimate_I_tilde(const MarketModel& model, const Policy& policy, double t0, const Eigen::VectorXd& x0,
                             const SimConfig& config) {
  const auto results = run_paths(model, policy, t0, x0, config, config.measure);
  std::vector<double> samples(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    samples[i] = config.measure == Measure::P ? std::exp(r.ln_chi + model.theta * r.int_g)
                                              : std::exp(model.theta * r.int_g);
  }
  SimEstimate e = summarize(samples, config.antithetic, config.measure);
  add_counts(e, results);
  return e;
}

SimEstimate estimate_chi_mean(const MarketModel& model, const Policy& policy, double t0, const Eigen::VectorXd& x0,
                              const SimConfig& config) {
  const auto results = run_paths(model, policy, t0, x0, config, Measure::P);
  std::vector<double> samples(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) samples[i] = std::exp(results[i].ln_chi);
  SimEstimate e = summarize(samples, config.antithetic, Measure::P);
  add_counts(e, results);
  return e;
}

WealthEstimate estimate_J_wealth(const MarketModel& model, const Policy& policy, const Eigen::VectorXd& x0, double t0,
                                 const SimConfig& config, bool keep_paths) {
  const auto results = run_paths(model, policy, t0, x0, config, Measure::P);
  const double theta = model.theta;
  std::vector<double> pow_samples(results.size());
  std::vector<double> logs;
  logs.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    pow_samples[i] = std::exp(-theta * results[i].ln_v);
    if (std::isfinite(results[i].ln_v)) logs.push_back(results[i].ln_v);
  }
  WealthEstimate w;
  const SimEstimate m = summarize(pow_samples, config.antithetic, Measure::P);
  w.J = m;
  w.J.mean = -std::log(m.mean) / theta + 0.0;  // no negative zero
  w.J.std_error = m.std_error / (theta * m.mean);
  add_counts(w.J, results);
  const auto N = logs.size();
  if (N > 0) {
    w.mean_log_wealth = pairwise_sum(logs.data(), N) / static_cast<double>(N);
    std::vector<double> sq(N);
    for (std::size_t i = 0; i < N; ++i) sq[i] = (logs[i] - w.mean_log_wealth) * (logs[i] - w.mean_log_wealth);
    w.var_log_wealth = pairwise_sum(sq.data(), N) / static_cast<double>(N);
  }
  if (keep_paths) {
    w.log_wealth.resize(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) w.log_wealth[i] = results[i].ln_v;
  }
  return w;
}

FeynmanKacRecord verify_feynman_kac(const MarketModel& model, const Lattice& lattice, const ValueField& value,
                                    const PolicyField& policy, double t0, const Eigen::VectorXd& x0,
                                    const SimConfig& config, double allowance) {
  if (value.kind != ValueKind::Transformed) throw Error(ErrorCode::InvalidArgument, "expected the transformed value");
  FeynmanKacRecord rec;
  const int k = std::clamp(static_cast<int>(std::lround(t0 / lattice.dt())), 0, lattice.time_steps());
  rec.pde_value = interpolate(lattice, value.slice(k), x0);
  rec.mc = estimate_I_tilde(model, Policy::field(policy, lattice), t0, x0, config);
  rec.allowance = allowance;
  rec.band = 3.0 * rec.mc.std_error + allowance;
  rec.difference = std::abs(rec.pde_value - rec.mc.mean);
  rec.passed = rec.difference <= rec.band;
  return rec;
}

OptimalityProbe optimality_probe(const MarketModel& model, const Lattice& lattice, const PolicyField& policy,
                                 const Eigen::VectorXd& x0, const SimConfig& config) {
  const double theta = model.theta;
  OptimalityProbe probe;
  const Policy star = Policy::field(policy, lattice);
  const WealthEstimate w_star = estimate_J_wealth(model, star, x0, 0.0, config, true);
  probe.J_star = w_star.J.mean;
  probe.J_star_std_error = w_star.J.std_error;

  std::vector<std::pair<std::string, PolicyField>> variants;
  for (double s : {0.9, 1.1, 0.75, 1.25}) {
    PolicyField scaled = policy;
    for (auto& hk : scaled.h) hk *= s;
    variants.emplace_back("scale " + std::to_string(s).substr(0, 4), shrink_into_feasible(model, lattice, policy, scaled));
  }
  {
    std::mt19937_64 gen(splitmix64(config.seed ^ 0xA5A5A5A5ull));
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(model.m());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(gen);
    v /= v.norm();
    PolicyField moved = policy;
    for (auto& hk : moved.h)
      for (Eigen::Index node = 0; node < hk.cols(); ++node)
        hk.col(node) += 0.25 * std::max(hk.col(node).norm(), 0.1) * v;
    variants.emplace_back("random direction", shrink_into_feasible(model, lattice, policy, moved));
  }

  const auto N = w_star.log_wealth.size();
  std::vector<double> y_star(N);
  for (std::size_t i = 0; i < N; ++i) y_star[i] = std::exp(-theta * w_star.log_wealth[i]);
  const double m_star = std::exp(-theta * probe.J_star);

  probe.passed = true;
  for (const auto& [label, field] : variants) {
    const WealthEstimate w = estimate_J_wealth(model, Policy::field(field, lattice), x0, 0.0, config, true);
    ProbeRow row;
    row.label = label;
    row.J = w.J.mean;
    row.std_error = w.J.std_error;
    row.advantage = probe.J_star - row.J;
    const double m_p = std::exp(-theta * row.J);
    std::vector<double> z;
    z.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
      const double zi = y_star[i] / m_star - std::exp(-theta * w.log_wealth[i]) / m_p;
      if (std::isfinite(zi)) z.push_back(zi);
    }
    const SimEstimate zs = summarize(z, false, Measure::P);
    row.advantage_std_error = zs.std_error / theta;
    row.passed = row.advantage >= -3.0 * row.advantage_std_error;
    probe.passed = probe.passed && row.passed;
    probe.rows.push_back(row);
  }
  return probe;
}

double pairwise_sum(const double* data, std::size_t count) {
  if (count <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += data[i];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, count - half);
}

int worker_threads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("RISKHJB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

nlohmann::json to_json(const SimEstimate& e) {
  return {{"mean", e.mean},
          {"std_error", e.std_error},
          {"paths", e.paths},
          {"measure", e.measure == Measure::P ? "P" : "Ph"},
          {"excluded_paths", e.excluded_paths},
          {"clamped_steps", e.clamped_steps},
          {"path_steps", e.path_steps}};
}

nlohmann::json to_json(const FeynmanKacRecord& r) {
  return {{"pde_value", r.pde_value}, {"mc", to_json(r.mc)},  {"allowance", r.allowance},
          {"band", r.band},           {"difference", r.difference}, {"passed", r.passed}};
}

nlohmann::json to_json(const OptimalityProbe& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : p.rows)
    rows.push_back({{"policy", r.label},
                    {"J", r.J},
                    {"std_error", r.std_error},
                    {"advantage", r.advantage},
                    {"advantage_std_error", r.advantage_std_error},
                    {"passed", r.passed}});
  return {{"J_star", p.J_star}, {"J_star_std_error", p.J_star_std_error}, {"rows", rows}, {"passed", p.passed}};
}

}  // namespace riskhjb
