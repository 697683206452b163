#include "riskhjb/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace riskhjb {

namespace {

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& message) const {
    std::ostringstream os;
    os << source_;
    if (node.IsDefined() && node.Mark().line >= 0)
      os << ':' << node.Mark().line + 1 << ':' << node.Mark().column + 1;
    os << ": " << message;
    throw Error(ErrorCode::ParseError, os.str());
  }

  void allow_keys(const YAML::Node& map, const std::string& where, std::set<std::string> keys) const {
    if (!map.IsMap()) fail(map, where + " must be a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!keys.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
    }
  }

  YAML::Node require(const YAML::Node& map, const std::string& key, const std::string& where) const {
    const YAML::Node v = map[key];
    if (!v) fail(map, where + " is missing '" + key + "'");
    return v;
  }

  double number(const YAML::Node& node, const std::string& what) const {
    if (!node.IsScalar()) fail(node, what + " must be a number");
    try {
      return node.as<double>();
    } catch (const YAML::Exception&) {
      fail(node, what + " must be a number, got '" + node.Scalar() + "'");
    }
  }

  int integer(const YAML::Node& node, const std::string& what) const {
    if (!node.IsScalar()) fail(node, what + " must be an integer");
    try {
      return node.as<int>();
    } catch (const YAML::Exception&) {
      fail(node, what + " must be an integer, got '" + node.Scalar() + "'");
    }
  }

  Eigen::VectorXd vector(const YAML::Node& node, Eigen::Index size, const std::string& what,
                         bool broadcast = false) const {
    if (node.IsScalar()) {
      if (size != 1 && !broadcast) fail(node, what + " needs " + std::to_string(size) + " entries");
      return Eigen::VectorXd::Constant(size, number(node, what));
    }
    if (!node.IsSequence()) fail(node, what + " must be a number or a list");
    if (static_cast<Eigen::Index>(node.size()) != size)
      fail(node, what + " needs " + std::to_string(size) + " entries, got " + std::to_string(node.size()));
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = number(node[static_cast<std::size_t>(i)], what);
    return v;
  }

  // Scalar (1x1), flat row-major list, or list of rows.
  Eigen::MatrixXd matrix(const YAML::Node& node, Eigen::Index rows, Eigen::Index cols, const std::string& what) const {
    const std::string shape = std::to_string(rows) + "x" + std::to_string(cols);
    if (node.IsScalar()) {
      if (rows * cols != 1) fail(node, what + " must be " + shape);
      return Eigen::MatrixXd::Constant(1, 1, number(node, what));
    }
    if (!node.IsSequence()) fail(node, what + " must be a number or a list");
    Eigen::MatrixXd out(rows, cols);
    if (node.size() > 0 && node[0].IsSequence()) {
      if (static_cast<Eigen::Index>(node.size()) != rows) fail(node, what + " must be " + shape);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const YAML::Node row = node[static_cast<std::size_t>(r)];
        if (!row.IsSequence() || static_cast<Eigen::Index>(row.size()) != cols) fail(row, what + " must be " + shape);
        for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = number(row[static_cast<std::size_t>(c)], what);
      }
      return out;
    }
    if (static_cast<Eigen::Index>(node.size()) != rows * cols)
      fail(node, what + " must be " + shape + " (" + std::to_string(rows * cols) + " entries)");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        out(r, c) = number(node[static_cast<std::size_t>(r * cols + c)], what);
    return out;
  }

  CoefficientFn coefficient(const YAML::Node& node, Eigen::Index rows, Eigen::Index cols, Eigen::Index n,
                            const std::string& what) const {
    if (!node.IsMap()) return CoefficientFn::constant(matrix(node, rows, cols, what));
    allow_keys(node, what, {"family", "value", "state_slope", "time_slope", "lower", "upper"});
    const std::string family = node["family"] ? node["family"].as<std::string>() : "constant";
    const Eigen::MatrixXd value = matrix(require(node, "value", what), rows, cols, what + ".value");
    const Eigen::Index size = rows * cols;
    try {
      if (family == "constant") {
        for (const char* key : {"state_slope", "time_slope", "lower", "upper"})
          if (node[key]) fail(node[key], what + ": '" + key + "' is not used by the constant family");
        return CoefficientFn::constant(value);
      }
      const Eigen::MatrixXd slope = matrix(require(node, "state_slope", what), size, n, what + ".state_slope");
      const Eigen::VectorXd time_slope =
          node["time_slope"] ? vector(node["time_slope"], size, what + ".time_slope", true) : Eigen::VectorXd::Zero(size);
      if (family == "affine") {
        if (node["lower"] || node["upper"]) fail(node, what + ": caps need family affine_saturated");
        return CoefficientFn::affine(value, slope, time_slope);
      }
      if (family == "affine_saturated") {
        const Eigen::VectorXd lo = vector(require(node, "lower", what), size, what + ".lower", true);
        const Eigen::VectorXd hi = vector(require(node, "upper", what), size, what + ".upper", true);
        return CoefficientFn::affine_saturated(value, slope, time_slope, lo, hi);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ParseError) throw;
      fail(node, what + ": " + e.what());
    }
    fail(node["family"], what + ": unknown family '" + family + "'");
  }

  RunConfig parse(const YAML::Node& root) const {
    if (!root.IsMap()) fail(root, "document must be a mapping");
    allow_keys(root, "document", {"factor", "assets", "jumps", "constraints", "risk", "grid"});
    RunConfig cfg;
    MarketModel& model = cfg.model;

    const YAML::Node factor = require(root, "factor", "document");
    allow_keys(factor, "factor", {"n", "b", "Lambda"});
    const YAML::Node assets = require(root, "assets", "document");
    allow_keys(assets, "assets", {"m", "a0", "a", "Sigma"});
    const int n = integer(require(factor, "n", "factor"), "factor.n");
    const int m = integer(require(assets, "m", "assets"), "assets.m");
    if (n < 1) fail(factor["n"], "factor.n must be at least 1");
    if (m < 1) fail(assets["m"], "assets.m must be at least 1");
    const Eigen::Index M = n + m;
    model.factor.n = n;
    model.assets.m = m;
    model.factor.b = coefficient(require(factor, "b", "factor"), n, 1, n, "factor.b");
    model.factor.Lambda = coefficient(require(factor, "Lambda", "factor"), n, M, n, "factor.Lambda");
    model.assets.a0 = coefficient(require(assets, "a0", "assets"), 1, 1, n, "assets.a0");
    model.assets.a = coefficient(require(assets, "a", "assets"), m, 1, n, "assets.a");
    model.assets.Sigma = coefficient(require(assets, "Sigma", "assets"), m, M, n, "assets.Sigma");

    if (const YAML::Node jumps = root["jumps"]) {
      allow_keys(jumps, "jumps", {"atoms"});
      if (const YAML::Node atoms = jumps["atoms"]) {
        if (!atoms.IsSequence()) fail(atoms, "jumps.atoms must be a list");
        for (std::size_t j = 0; j < atoms.size(); ++j) {
          const std::string where = "jumps.atoms[" + std::to_string(j) + "]";
          const YAML::Node atom = atoms[j];
          allow_keys(atom, where, {"lambda", "gamma", "xi"});
          JumpAtom a;
          a.lambda = number(require(atom, "lambda", where), where + ".lambda");
          if (!(a.lambda > 0.0)) fail(atom["lambda"], where + ".lambda must be positive");
          a.gamma = atom["gamma"] ? vector(atom["gamma"], m, where + ".gamma") : Eigen::VectorXd::Zero(m);
          if (atom["xi"]) a.xi = coefficient(atom["xi"], n, 1, n, where + ".xi");
          if (!atom["xi"] && !atom["gamma"]) fail(atom, where + " needs gamma or xi");
          model.nu.atoms.push_back(std::move(a));
        }
      }
    }

    if (const YAML::Node cons = root["constraints"]) {
      allow_keys(cons, "constraints", {"Upsilon", "upsilon"});
      const YAML::Node rhs = require(cons, "upsilon", "constraints");
      const Eigen::Index r = rhs.IsSequence() ? static_cast<Eigen::Index>(rhs.size()) : 1;
      model.constraints.upsilon = vector(rhs, r, "constraints.upsilon");
      model.constraints.Upsilon = matrix(require(cons, "Upsilon", "constraints"), m, r, "constraints.Upsilon");
    } else {
      model.constraints.Upsilon = Eigen::MatrixXd(m, 0);
      model.constraints.upsilon = Eigen::VectorXd(0);
    }

    const YAML::Node risk = require(root, "risk", "document");
    allow_keys(risk, "risk", {"theta", "T"});
    model.theta = number(require(risk, "theta", "risk"), "risk.theta");
    model.T = number(require(risk, "T", "risk"), "risk.T");
    if (!(model.theta > 0.0)) fail(risk["theta"], "risk.theta must be positive");
    if (!(model.T > 0.0)) fail(risk["T"], "risk.T must be positive");

    if (const YAML::Node grid = root["grid"]) {
      allow_keys(grid, "grid", {"nodes", "time_steps", "lower", "upper"});
      if (const YAML::Node nodes = grid["nodes"]) {
        const Eigen::VectorXd v = vector(nodes, n, "grid.nodes", true);
        for (Eigen::Index i = 0; i < n; ++i) cfg.grid.nodes.push_back(static_cast<int>(v(i)));
      }
      if (grid["time_steps"]) cfg.grid.time_steps = integer(grid["time_steps"], "grid.time_steps");
      if (grid["lower"]) cfg.grid.lower = vector(grid["lower"], n, "grid.lower", true);
      if (grid["upper"]) cfg.grid.upper = vector(grid["upper"], n, "grid.upper", true);
    }
    return cfg;
  }

 private:
  std::string source_;
};

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Eigen::VectorXd row = m.row(r).transpose();
    rows.push_back(vec_json(row));
  }
  return rows;
}

Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd json_mat(const nlohmann::json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = json_vec(j[static_cast<std::size_t>(r)]).transpose();
  return m;
}

nlohmann::json coef_json(const CoefficientFn& f) {
  const char* family = f.family() == CoefficientFamily::Constant ? "constant"
                       : f.family() == CoefficientFamily::Affine ? "affine"
                                                                  : "affine_saturated";
  nlohmann::json j{{"family", family}, {"rows", f.rows()}, {"cols", f.cols()}, {"value", vec_json(f.base())}};
  if (f.family() != CoefficientFamily::Constant) {
    j["state_slope"] = mat_json(f.state_slope());
    j["state_dim"] = f.state_dim();
    j["time_slope"] = vec_json(f.time_slope());
  }
  if (f.family() == CoefficientFamily::AffineSaturated) {
    j["lower"] = vec_json(f.lower());
    j["upper"] = vec_json(f.upper());
  }
  return j;
}

CoefficientFn json_coef(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Eigen::VectorXd flat = json_vec(j.at("value"));
  Eigen::MatrixXd value(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) value(r, c) = flat(r * cols + c);
  const auto family = j.at("family").get<std::string>();
  if (family == "constant") return CoefficientFn::constant(value);
  const Eigen::MatrixXd slope = json_mat(j.at("state_slope"), j.at("state_dim").get<Eigen::Index>());
  const Eigen::VectorXd ts = json_vec(j.at("time_slope"));
  if (family == "affine") return CoefficientFn::affine(value, slope, ts);
  return CoefficientFn::affine_saturated(value, slope, ts, json_vec(j.at("lower")), json_vec(j.at("upper")));
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << source << ':' << e.mark.line + 1 << ':' << e.mark.column + 1 << ": " << e.msg;
    throw Error(ErrorCode::ParseError, os.str());
  }
  try {
    return Parser(source).parse(root);
  } catch (const YAML::Exception& e) {
    std::ostringstream os;
    os << source << ':' << e.mark.line + 1 << ':' << e.mark.column + 1 << ": " << e.msg;
    throw Error(ErrorCode::ParseError, os.str());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, path + ": cannot open file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

Lattice lattice_for(const RunConfig& config, const std::vector<int>& node_override, int time_steps_override) {
  const Eigen::Index n = config.model.n();
  if (n > 2) throw Error(ErrorCode::InvalidArgument, "the lattice supports n <= 2 factors");
  std::vector<int> nodes = !node_override.empty() ? node_override : config.grid.nodes;
  if (nodes.empty()) nodes.assign(static_cast<std::size_t>(n), n == 1 ? 201 : 41);
  if (nodes.size() == 1 && n == 2) nodes.push_back(nodes.front());
  if (static_cast<Eigen::Index>(nodes.size()) != n)
    throw Error(ErrorCode::InvalidArgument, "grid needs one node count per factor");
  int steps = time_steps_override > 0 ? time_steps_override : config.grid.time_steps;
  if (steps <= 0) steps = n == 1 ? 400 : 50;
  const Eigen::VectorXd lo = config.grid.lower.size() ? config.grid.lower : Eigen::VectorXd::Constant(n, -1.5);
  const Eigen::VectorXd hi = config.grid.upper.size() ? config.grid.upper : Eigen::VectorXd::Constant(n, 1.5);
  return Lattice(lo, hi, nodes, steps, config.model.T);
}

nlohmann::json model_to_json(const MarketModel& model) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : model.nu.atoms) {
    nlohmann::json j{{"lambda", a.lambda}, {"gamma", vec_json(a.gamma)}};
    if (a.xi.size() > 0) j["xi"] = coef_json(a.xi);
    atoms.push_back(j);
  }
  return {{"factor", {{"n", model.n()}, {"b", coef_json(model.factor.b)}, {"Lambda", coef_json(model.factor.Lambda)}}},
          {"assets",
           {{"m", model.m()},
            {"a0", coef_json(model.assets.a0)},
            {"a", coef_json(model.assets.a)},
            {"Sigma", coef_json(model.assets.Sigma)}}},
          {"jumps", {{"atoms", atoms}}},
          {"constraints",
           {{"Upsilon", mat_json(model.constraints.Upsilon)}, {"upsilon", vec_json(model.constraints.upsilon)}}},
          {"risk", {{"theta", model.theta}, {"T", model.T}}}};
}

MarketModel model_from_json(const nlohmann::json& j) {
  try {
    MarketModel model;
    model.factor.n = j.at("factor").at("n").get<Eigen::Index>();
    model.factor.b = json_coef(j.at("factor").at("b"));
    model.factor.Lambda = json_coef(j.at("factor").at("Lambda"));
    model.assets.m = j.at("assets").at("m").get<Eigen::Index>();
    model.assets.a0 = json_coef(j.at("assets").at("a0"));
    model.assets.a = json_coef(j.at("assets").at("a"));
    model.assets.Sigma = json_coef(j.at("assets").at("Sigma"));
    for (const auto& a : j.at("jumps").at("atoms")) {
      JumpAtom atom;
      atom.lambda = a.at("lambda").get<double>();
      atom.gamma = json_vec(a.at("gamma"));
      if (a.contains("xi")) atom.xi = json_coef(a.at("xi"));
      model.nu.atoms.push_back(std::move(atom));
    }
    const Eigen::VectorXd ups = json_vec(j.at("constraints").at("upsilon"));
    model.constraints.upsilon = ups;
    model.constraints.Upsilon = j.at("constraints").at("Upsilon").empty()
                                    ? Eigen::MatrixXd(model.m(), ups.size())
                                    : json_mat(j.at("constraints").at("Upsilon"), ups.size());
    model.theta = j.at("risk").at("theta").get<double>();
    model.T = j.at("risk").at("T").get<double>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
  }
}

std::string config_hash(const MarketModel& model) {
  const std::string text = model_to_json(model).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace riskhjb
