#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "satdiff/diagnostics.hpp"
#include "satdiff/solver.hpp"

namespace satdiff {

struct CascadeBlock {
  std::vector<std::vector<double>> vertices;  // [x, t] or [x, y, t]
  double radius = 0.1;
  CascadeOptions options;
};

struct ConvergenceBlock {
  double tail_fraction = 0.1;
  double gap_tol = 1e-4;
  double residual_tol = 1e-3;
};

struct DiagnosticsBlock {
  std::optional<CascadeBlock> cascade;
  double classifier_nu = 0.5;
  std::optional<ConvergenceBlock> convergence;
};

/// One scenario: a simulation plus the diagnostics and verification to run on
/// its output. Reproducible from this file alone.
struct Manifest {
  std::string name;
  SimulationConfig simulation;
  DiagnosticsBlock diagnostics;
  nlohmann::json verify;  // array of check descriptors, resolved at execution
  std::filesystem::path output_dir;
  std::filesystem::path base_dir;  // directory of the manifest file
};

Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace satdiff
