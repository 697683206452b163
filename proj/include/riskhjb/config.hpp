#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "riskhjb/grid.hpp"
#include "riskhjb/model.hpp"

namespace riskhjb {

/// Optional `grid` section of a configuration document.
struct GridSpec {
  std::vector<int> nodes;   // per axis, empty means default
  int time_steps = 0;       // 0 means default
  Eigen::VectorXd lower;    // empty means default box
  Eigen::VectorXd upper;
};

struct RunConfig {
  MarketModel model;
  GridSpec grid;
};

/// Parses a YAML document with sections factor, assets, jumps, constraints,
/// risk and an optional grid. Coefficients are either a plain matrix (scalar,
/// flat row-major list or list of rows) or a mapping
/// {family: constant|affine|affine_saturated, value, state_slope, time_slope,
/// lower, upper}. Errors throw ParseError as "source:line:column: message".
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Lattice from the grid section, with defaults for missing entries:
/// 201 nodes (n = 1) or 41 per axis (n = 2), 400 or 50 time steps, box [-1.5, 1.5]^n.
Lattice lattice_for(const RunConfig& config, const std::vector<int>& node_override = {},
                    int time_steps_override = 0);

/// Canonical JSON of the model; equal models give byte-identical dumps.
nlohmann::json model_to_json(const MarketModel& model);
MarketModel model_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a of the canonical model JSON, as 16 hex digits.
std::string config_hash(const MarketModel& model);

}  // namespace riskhjb
