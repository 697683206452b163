#include "riskhjb/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "riskhjb/config.hpp"
#include "riskhjb/grid.hpp"
#include "riskhjb/montecarlo.hpp"
#include "riskhjb/oracle.hpp"
#include "riskhjb/solver.hpp"

namespace riskhjb {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
      return kExitParse;
    case ErrorCode::DimensionMismatch:
    case ErrorCode::EllipticityViolation:
    case ErrorCode::SimultaneousJump:
    case ErrorCode::EmptyConstraintInterior:
    case ErrorCode::InvalidArgument:
      return kExitValidation;
    case ErrorCode::HashMismatch:
      return kExitVerification;
    case ErrorCode::InfeasibleControl:
    case ErrorCode::InfeasibleProblem:
    case ErrorCode::NonConvergence:
    case ErrorCode::StabilityViolation:
    case ErrorCode::NonPositiveValue:
    case ErrorCode::BlowUp:
      return kExitSolver;
  }
  return kExitSolver;
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j{{"config_path", m.config_path},
                   {"command", m.command},
                   {"out_dir", m.out_dir},
                   {"seed", m.seed},
                   {"tool_version", m.tool_version},
                   {"config_hash", m.config_hash},
                   {"flags", m.flags},
                   {"timestamps", {{"started", m.started}, {"finished", m.finished}}},
                   {"wall_seconds", m.wall_seconds}};
  j["exit_code"] = m.exit_code ? nlohmann::json(*m.exit_code) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json validation_to_json(const ValidationReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json j{{"id", c.id},
                     {"assumption", c.assumption},
                     {"passed", c.passed},
                     {"blocking", c.blocking},
                     {"metric", c.metric},
                     {"detail", c.detail}};
    if (c.failure) j["failure"] = std::string(to_string(*c.failure));
    checks.push_back(j);
  }
  return {{"accepted", report.accepted()},
          {"checks", checks},
          {"min_eig_factor_diffusion", report.min_eig_factor_diffusion},
          {"min_eig_asset_diffusion", report.min_eig_asset_diffusion},
          {"constraint_margin", report.constraint_margin}};
}

namespace {

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + path.string());
  return in;
}

nlohmann::json options_json(const CliOptions& o) {
  nlohmann::json j{{"grid", o.grid},        {"tmax_steps", o.time_steps}, {"paths", o.paths},
                   {"dt", o.dt},            {"seed", o.seed},             {"oracle", o.oracle},
                   {"antithetic", o.antithetic}, {"x0", o.x0},            {"policy", o.policy},
                   {"artifacts", o.artifacts_dir}};
  j["theta"] = o.theta ? nlohmann::json(*o.theta) : nlohmann::json(nullptr);
  return j;
}

struct Loaded {
  RunConfig config;
  std::string hash;
};

Loaded load(const CliOptions& o) {
  Loaded l{load_config(o.config_path), {}};
  if (o.theta) {
    if (!(*o.theta > 0.0)) throw Error(ErrorCode::InvalidArgument, "--theta must be positive");
    l.config.model.theta = *o.theta;
  }
  l.hash = config_hash(l.config.model);
  return l;
}

// Runs a command body with the manifest written before and after it.
int run_with_manifest(const CliOptions& o, std::ostream& log, const std::function<int(RunManifest&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir(o.out_dir);
  RunManifest manifest;
  manifest.config_path = o.config_path;
  manifest.command = o.command;
  manifest.out_dir = o.out_dir;
  manifest.seed = o.seed;
  manifest.started = now_utc();
  manifest.flags = options_json(o);
  int code = kExitOk;
  try {
    fs::create_directories(dir);
    write_json(dir / "manifest.json", to_json(manifest));
    code = body(manifest);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    code = exit_code_for(e.code());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    code = kExitSolver;
  }
  manifest.finished = now_utc();
  manifest.exit_code = code;
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    write_json(dir / "manifest.json", to_json(manifest));
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
  }
  return code;
}

ProbeSpec probe_for(const Lattice& lattice) {
  ProbeSpec probe;
  probe.lower = lattice.lower();
  probe.upper = lattice.upper();
  for (int node = 0; node < lattice.size(); ++node) probe.extra_points.push_back(lattice.point(node));
  return probe;
}

// Validates and writes validation.json; returns false on a blocking failure.
bool validate_and_report(const Loaded& l, const Lattice& lattice, const fs::path& dir, std::ostream& log) {
  nlohmann::json j;
  bool ok = false;
  try {
    const ValidationReport report = validate_model(l.config.model, probe_for(lattice));
    j = validation_to_json(report);
    ok = report.accepted();
    for (const auto& c : report.checks)
      if (!c.passed) log << (c.blocking ? "FAIL " : "note ") << c.id << ": " << c.assumption << " (" << c.detail << ")\n";
  } catch (const Error& e) {
    j = {{"accepted", false}, {"error", {{"code", to_string(e.code())}, {"message", e.what()}}}};
    log << "error: " << e.what() << '\n';
  }
  j["config_hash"] = l.hash;
  write_json(dir / "validation.json", j);
  return ok;
}

Eigen::VectorXd start_point(const CliOptions& o, const Lattice& lattice) {
  if (o.x0.empty()) return 0.5 * (lattice.lower() + lattice.upper());
  if (static_cast<Eigen::Index>(o.x0.size()) != lattice.n())
    throw Error(ErrorCode::InvalidArgument, "--x0 needs one entry per factor");
  return Eigen::Map<const Eigen::VectorXd>(o.x0.data(), static_cast<Eigen::Index>(o.x0.size()));
}

SimConfig sim_config(const CliOptions& o) {
  SimConfig s;
  s.paths = o.paths;
  s.dt = o.dt;
  s.seed = o.seed;
  s.antithetic = o.antithetic;
  s.threads = o.threads;
  return s;
}

// Value and policy along each axis through the node nearest the box centre.
void write_slices(const fs::path& path, const Lattice& lattice, const ValueField& tilde, const ValueField& phi,
                  const PolicyField& policy) {
  auto out = open_out(path);
  out << "axis,x,phi_tilde,phi";
  for (Eigen::Index i = 0; i < policy.m(); ++i) out << ",h" << i;
  out << '\n';
  out << std::setprecision(17);
  const int centre = lattice.nearest_node(0.5 * (lattice.lower() + lattice.upper()));
  const auto cidx = lattice.multi_index(centre);
  for (int axis = 0; axis < lattice.n(); ++axis) {
    auto idx = cidx;
    for (int i = 0; i < lattice.nodes(axis); ++i) {
      idx[static_cast<std::size_t>(axis)] = i;
      const int node = lattice.index(idx[0], idx[1]);
      out << axis << ',' << lattice.coord(node, axis) << ',' << tilde.values(0, node) << ',' << phi.values(0, node);
      for (Eigen::Index c = 0; c < policy.m(); ++c) out << ',' << policy.h[0](c, node);
      out << '\n';
    }
  }
}

std::vector<std::pair<double, Eigen::VectorXd>> ansatz_probes(const Lattice& lattice, double T) {
  std::vector<std::pair<double, Eigen::VectorXd>> probes;
  const auto core = lattice.interior_core();
  const std::size_t stride = std::max<std::size_t>(1, core.size() / 11);
  for (int i = 0; i <= 10; ++i)
    for (std::size_t c = 0; c < core.size(); c += stride) probes.emplace_back(T * i / 10.0, lattice.point(core[c]));
  return probes;
}

nlohmann::json oracle_comparison(const Loaded& l, const Lattice& lattice, const ValueField& phi, const fs::path& dir) {
  const MarketModel& model = l.config.model;
  LGQSpec spec;
  try {
    spec = lgq_from_model(model, lattice.lower(), lattice.upper());
  } catch (const Error& e) {
    return {{"applicable", false}, {"reason", e.what()}, {"config_hash", l.hash}};
  }
  const RiccatiSolution sol = riccati_solve(spec);
  const double residual = verify_ansatz(spec, sol, ansatz_probes(lattice, model.T));
  double worst = 0.0;
  for (int node : lattice.interior_core()) {
    const double r = sol.value(0, lattice.point(node));
    worst = std::max(worst, std::abs(phi.values(0, node) - r) / (1.0 + std::abs(r)));
  }
  std::vector<double> times;
  for (int i = 0; i <= 10; ++i) times.push_back(model.T * i / 10.0);
  write_json(dir / "riccati.json", {{"config_hash", l.hash},
                                    {"ansatz_residual", residual},
                                    {"coefficients", riccati_to_json(sol, times)}});
  return {{"applicable", true},
          {"config_hash", l.hash},
          {"ansatz_residual", residual},
          {"max_relative_error_interior_core", worst},
          {"interior_core_nodes", lattice.interior_core().size()}};
}

}  // namespace

int cmd_validate(const CliOptions& o, std::ostream& log) {
  return run_with_manifest(o, log, [&](RunManifest& manifest) {
    const Loaded l = load(o);
    manifest.config_hash = l.hash;
    const Lattice lattice = lattice_for(l.config, o.grid, o.time_steps);
    const bool ok = validate_and_report(l, lattice, o.out_dir, log);
    log << (ok ? "model valid" : "model rejected") << " (config " << l.hash << ")\n";
    return ok ? kExitOk : kExitValidation;
  });
}

int cmd_solve(const CliOptions& o, std::ostream& log) {
  return run_with_manifest(o, log, [&](RunManifest& manifest) {
    const Loaded l = load(o);
    manifest.config_hash = l.hash;
    const MarketModel& model = l.config.model;
    const Lattice lattice = lattice_for(l.config, o.grid, o.time_steps);
    const fs::path dir(o.out_dir);
    if (!validate_and_report(l, lattice, dir, log)) return kExitValidation;

    nlohmann::json report{{"config_hash", l.hash}, {"lattice", lattice_to_json(lattice)}, {"theta", model.theta}};
    SolveResult result;
    try {
      result = policy_iteration_solve(model, lattice);
    } catch (const Error& e) {
      report["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
      write_json(dir / "solve_report.json", report);
      log << "error: " << e.what() << '\n';
      return exit_code_for(e.code());
    }
    nlohmann::json solver = report_to_json(result.report);
    solver.erase("wall_seconds");  // timing lives in the manifest so artifacts stay deterministic
    report["solver"] = solver;
    write_json(dir / "solve_report.json", report);

    const ValueField phi = transform(result.value, model.theta, TransformDirection::ToRiskSensitive);
    {
      auto out = open_out(dir / "phi_tilde.csv");
      write_value_csv(out, result.value, lattice);
    }
    {
      auto out = open_out(dir / "phi.csv");
      write_value_csv(out, phi, lattice);
    }
    {
      auto out = open_out(dir / "policy.csv");
      write_policy_csv(out, result.policy, lattice);
    }
    write_slices(dir / "slices_t0.csv", lattice, result.value, phi, result.policy);
    log << "solved in " << result.report.outer_iterations << " outer iterations, Phi(0, centre) = "
        << phi.values(0, lattice.nearest_node(0.5 * (lattice.lower() + lattice.upper()))) << '\n';

    if (o.oracle) {
      const nlohmann::json cmp = oracle_comparison(l, lattice, phi, dir);
      write_json(dir / "oracle_comparison.json", cmp);
      if (cmp["applicable"].get<bool>())
        log << "oracle: max relative error " << cmp["max_relative_error_interior_core"].get<double>()
            << ", ansatz residual " << cmp["ansatz_residual"].get<double>() << '\n';
      else
        log << "oracle: not applicable (" << cmp["reason"].get<std::string>() << ")\n";
    }
    if (!result.report.converged) return kExitSolver;
    return kExitOk;
  });
}

namespace {

struct Artifacts {
  Lattice lattice;
  ValueField value;
  PolicyField policy;
};

Artifacts load_artifacts(const Loaded& l, const fs::path& dir) {
  const nlohmann::json report = read_json(dir / "solve_report.json");
  const std::string hash = report.value("config_hash", std::string());
  if (hash != l.hash)
    throw Error(ErrorCode::HashMismatch,
                "artifacts in " + dir.string() + " belong to config " + hash + ", not " + l.hash);
  if (report.contains("error")) throw Error(ErrorCode::InvalidArgument, "the solve in " + dir.string() + " failed");
  Lattice lattice = lattice_from_json(report.at("lattice"));
  auto vin = open_in(dir / "phi_tilde.csv");
  ValueField value = read_value_csv(vin, lattice, ValueKind::Transformed);
  auto pin = open_in(dir / "policy.csv");
  PolicyField policy = read_policy_csv(pin, lattice, static_cast<int>(l.config.model.m()));
  return {std::move(lattice), std::move(value), std::move(policy)};
}

}  // namespace

int cmd_simulate(const CliOptions& o, std::ostream& log) {
  return run_with_manifest(o, log, [&](RunManifest& manifest) {
    const Loaded l = load(o);
    manifest.config_hash = l.hash;
    const MarketModel& model = l.config.model;
    const fs::path dir(o.out_dir);
    const Lattice default_lattice = lattice_for(l.config, o.grid, o.time_steps);
    if (!validate_and_report(l, default_lattice, dir, log)) return kExitValidation;

    std::optional<Artifacts> art;
    Policy policy;
    std::string policy_kind;
    if (!o.policy.empty()) {
      if (static_cast<Eigen::Index>(o.policy.size()) != model.m())
        throw Error(ErrorCode::InvalidArgument, "--policy needs one entry per asset");
      const Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(o.policy.data(), model.m());
      if (!feasible_region_membership(model, h, 0.0)) throw Error(ErrorCode::InfeasibleControl, "--policy is not feasible");
      policy = Policy::constant(h);
      policy_kind = "constant";
    } else if (!o.artifacts_dir.empty()) {
      art = load_artifacts(l, o.artifacts_dir);
      policy = Policy::field(art->policy, art->lattice);
      policy_kind = "solved";
    } else {
      policy = Policy::constant(Eigen::VectorXd::Zero(model.m()));
      policy_kind = "zero";
    }
    const Eigen::VectorXd x0 = start_point(o, art ? art->lattice : default_lattice);
    SimConfig sim = sim_config(o);
    const WealthEstimate w = estimate_J_wealth(model, policy, x0, 0.0, sim);
    const SimEstimate chi = estimate_chi_mean(model, policy, 0.0, x0, sim);
    const SimEstimate ip = estimate_I_tilde(model, policy, 0.0, x0, sim);
    sim.measure = Measure::Ph;
    const SimEstimate iph = estimate_I_tilde(model, policy, 0.0, x0, sim);

    write_json(dir / "simulation.json", {{"config_hash", l.hash},
                                         {"policy", policy_kind},
                                         {"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
                                         {"J", to_json(w.J)},
                                         {"mean_log_wealth", w.mean_log_wealth},
                                         {"var_log_wealth", w.var_log_wealth},
                                         {"chi_mean", to_json(chi)},
                                         {"I_tilde_P", to_json(ip)},
                                         {"I_tilde_Ph", to_json(iph)}});

    log << "J = " << w.J.mean << " +- " << w.J.std_error << ", E[chi] = " << chi.mean << " +- " << chi.std_error
        << '\n';
    if (o.dump_paths <= 0) return kExitOk;
    if (o.dump_paths > 1000) throw Error(ErrorCode::InvalidArgument, "--dump-paths is capped at 1000");
    SimConfig sample = sim_config(o);
    sample.paths = o.dump_paths;
    const PathBundle bundle = simulate_factors(model, policy, x0, 0.0, sample);
    auto out = open_out(dir / "sample_paths.csv");
    out << "path,t";
    for (Eigen::Index i = 0; i < model.n(); ++i) out << ",x" << i;
    out << '\n' << std::setprecision(17);
    for (std::size_t p = 0; p < bundle.paths.size(); ++p) {
      const auto& path = bundle.paths[p];
      for (std::size_t s = 0; s < path.times.size(); ++s) {
        out << p << ',' << path.times[s];
        for (Eigen::Index i = 0; i < model.n(); ++i) out << ',' << path.X(i, static_cast<Eigen::Index>(s));
        out << '\n';
      }
    }
    return kExitOk;
  });
}

int cmd_verify(const CliOptions& o, std::ostream& log) {
  return run_with_manifest(o, log, [&](RunManifest& manifest) {
    const Loaded l = load(o);
    manifest.config_hash = l.hash;
    const MarketModel& model = l.config.model;
    const fs::path dir(o.out_dir);
    const fs::path art_dir = o.artifacts_dir.empty() ? dir : fs::path(o.artifacts_dir);
    const Artifacts art = load_artifacts(l, art_dir);
    const Lattice& lattice = art.lattice;
    const Eigen::VectorXd x0 = start_point(o, lattice);
    const SimConfig sim = sim_config(o);

    // Discretisation allowance: twice the change of Phi~(0, x0) against a
    // lattice with half the spacing and half the time steps.
    std::vector<int> coarse_nodes;
    for (int a = 0; a < lattice.n(); ++a) coarse_nodes.push_back((lattice.nodes(a) - 1) / 2 + 1);
    const Lattice coarse(lattice.lower(), lattice.upper(), coarse_nodes, std::max(1, lattice.time_steps() / 2),
                         model.T);
    const SolveResult coarse_solve = policy_iteration_solve(model, coarse);
    const double delta =
        std::abs(interpolate(lattice, art.value.slice(0), x0) - interpolate(coarse, coarse_solve.value.slice(0), x0));
    const double allowance = 2.0 * delta;

    const FeynmanKacRecord fk = verify_feynman_kac(model, lattice, art.value, art.policy, 0.0, x0, sim, allowance);
    const Policy star = Policy::field(art.policy, lattice);
    const SimEstimate chi = estimate_chi_mean(model, star, 0.0, x0, sim);
    const bool chi_ok = std::abs(chi.mean - 1.0) <= 3.0 * chi.std_error;
    const OptimalityProbe probe = optimality_probe(model, lattice, art.policy, x0, sim);
    const bool passed = fk.passed && chi_ok && probe.passed;

    write_json(dir / "verification.json",
               {{"config_hash", l.hash},
                {"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
                {"refinement_delta", delta},
                {"feynman_kac", to_json(fk)},
                {"chi_mean", {{"estimate", to_json(chi)}, {"passed", chi_ok}}},
                {"optimality", to_json(probe)},
                {"passed", passed}});
    log << (fk.passed ? "PASS" : "FAIL") << " Feynman-Kac: |" << fk.pde_value << " - " << fk.mc.mean
        << "| = " << fk.difference << " (band " << fk.band << ")\n";
    log << (chi_ok ? "PASS" : "FAIL") << " E[chi] = " << chi.mean << " +- " << chi.std_error << '\n';
    log << (probe.passed ? "PASS" : "FAIL") << " optimality probe: J* = " << probe.J_star << '\n';
    for (const auto& r : probe.rows)
      log << "  " << r.label << ": J = " << r.J << ", advantage " << r.advantage << " +- " << r.advantage_std_error
          << '\n';
    return passed ? kExitOk : kExitVerification;
  });
}

int cmd_oracle(const CliOptions& o, std::ostream& log) {
  return run_with_manifest(o, log, [&](RunManifest& manifest) {
    const Loaded l = load(o);
    manifest.config_hash = l.hash;
    const MarketModel& model = l.config.model;
    const fs::path dir(o.out_dir);
    const Lattice lattice = lattice_for(l.config, o.grid, o.time_steps);
    const LGQSpec spec = lgq_from_model(model, lattice.lower(), lattice.upper());
    const RiccatiSolution sol = riccati_solve(spec);
    const double residual = verify_ansatz(spec, sol, ansatz_probes(lattice, model.T));
    std::vector<double> times;
    for (int i = 0; i <= 10; ++i) times.push_back(model.T * i / 10.0);
    write_json(dir / "riccati.json", {{"config_hash", l.hash},
                                      {"ansatz_residual", residual},
                                      {"coefficients", riccati_to_json(sol, times)}});

    auto out = open_out(dir / "riccati_t0.csv");
    out << "t";
    for (int a = 0; a < lattice.n(); ++a) out << ",x" << a;
    out << ",phi";
    for (Eigen::Index i = 0; i < model.m(); ++i) out << ",h" << i;
    out << '\n' << std::setprecision(17);
    for (int node = 0; node < lattice.size(); ++node) {
      const Eigen::VectorXd x = lattice.point(node);
      out << 0.0;
      for (Eigen::Index a = 0; a < x.size(); ++a) out << ',' << x(a);
      out << ',' << sol.value(0, x);
      const Eigen::VectorXd h = sol.policy(spec, 0, x);
      for (Eigen::Index i = 0; i < h.size(); ++i) out << ',' << h(i);
      out << '\n';
    }
    const bool ok = residual <= 1e-6;
    log << (ok ? "PASS" : "FAIL") << " ansatz residual " << residual << '\n';
    return ok ? kExitOk : kExitVerification;
  });
}

int run_command(const CliOptions& o, std::ostream& log) {
  if (o.command == "validate") return cmd_validate(o, log);
  if (o.command == "solve") return cmd_solve(o, log);
  if (o.command == "simulate") return cmd_simulate(o, log);
  if (o.command == "verify") return cmd_verify(o, log);
  if (o.command == "oracle") return cmd_oracle(o, log);
  log << "error: unknown command '" << o.command << "'\n";
  return kExitParse;
}

}  // namespace riskhjb
