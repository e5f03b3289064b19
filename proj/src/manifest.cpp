#include "satdiff/manifest.hpp"

#include <fstream>

#include "satdiff/errors.hpp"

namespace satdiff {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ConfigError(path + ": " + why);
}

const json& member(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) fail(path + "." + key, "missing");
  return j.at(key);
}

double number(const json& j, const std::string& key, const std::string& path) {
  const json& v = member(j, key, path);
  if (!v.is_number()) fail(path + "." + key, "must be a number");
  return v.get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path fp(p);
  return fp.is_absolute() ? fp : base / fp;
}

PiecewiseLinear load_table(const std::filesystem::path& base, const json& j,
                           const std::string& path) {
  const std::string csv = member(j, "csv", path).get<std::string>();
  auto [xs, ys] = read_two_column_csv(resolve(base, csv));
  return PiecewiseLinear(std::move(xs), std::move(ys));
}

Grid parse_grid(const json& j) {
  const int dim = member(j, "dim", "simulation.grid").get<int>();
  const auto cells = member(j, "cells", "simulation.grid").get<std::vector<int>>();
  const auto lo = member(j, "lo", "simulation.grid").get<std::vector<double>>();
  const auto hi = member(j, "hi", "simulation.grid").get<std::vector<double>>();
  if (int(cells.size()) != dim || int(lo.size()) != dim || int(hi.size()) != dim)
    fail("simulation.grid", "cells/lo/hi must each have dim entries");
  return dim == 1 ? Grid::line(lo[0], hi[0], cells[0])
                  : Grid::box(lo[0], hi[0], cells[0], lo[1], hi[1], cells[1]);
}

SaturationSpec parse_saturation(const json& j, const std::filesystem::path& base) {
  const std::string form = member(j, "form", "simulation.saturation").get<std::string>();
  const double rho_max = number_or(j, "rho_max", 1.0);
  if (form == "power")
    return SaturationSpec::power(number(j, "m", "simulation.saturation"), rho_max);
  if (form == "tabulated")
    return SaturationSpec::tabulated(load_table(base, j, "simulation.saturation"),
                                     number(j, "beta", "simulation.saturation"),
                                     number_or(j, "c0", 1.0), number_or(j, "c1", 1.0),
                                     rho_max);
  if (form == "constant") return SaturationSpec::validation_constant(rho_max);
  fail("simulation.saturation.form", "unknown form '" + form + "'");
}

EnergyDensity parse_energy(const json& j) {
  const std::string kind = member(j, "kind", "simulation.energy").get<std::string>();
  if (kind == "boltzmann") return EnergyDensity::boltzmann();
  if (kind == "porous") return EnergyDensity::porous(number(j, "m", "simulation.energy"));
  fail("simulation.energy.kind", "unknown kind '" + kind + "'");
}

void parse_potential(const json& j, const std::string& path,
                     const std::filesystem::path& base, PotentialSpec::Preset& kind,
                     PiecewiseLinear& table) {
  const std::string preset = member(j, "preset", path).get<std::string>();
  if (preset == "zero") {
    kind = PotentialSpec::Preset::zero;
  } else if (preset == "quadratic") {
    kind = PotentialSpec::Preset::quadratic;
  } else if (preset == "tabulated") {
    kind = PotentialSpec::Preset::tabulated;
    table = load_table(base, j, path);
  } else {
    fail(path + ".preset", "unknown preset '" + preset + "'");
  }
}

InitialCondition parse_initial(const json& j, const std::filesystem::path& base) {
  InitialCondition init;
  const std::string preset = member(j, "preset", "simulation.initial").get<std::string>();
  auto read_center = [&](const std::string& key, std::array<double, 2>& out) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<double>>();
    for (std::size_t a = 0; a < std::min<std::size_t>(2, v.size()); ++a) out[a] = v[a];
  };
  if (preset == "constant") {
    init.preset = InitialCondition::Preset::constant;
    init.value = number(j, "value", "simulation.initial");
  } else if (preset == "gaussian-bump") {
    init.preset = InitialCondition::Preset::gaussian_bump;
    read_center("center", init.center);
    init.width = number(j, "width", "simulation.initial");
    init.height = number(j, "height", "simulation.initial");
  } else if (preset == "two-bumps") {
    init.preset = InitialCondition::Preset::two_bumps;
    read_center("center", init.center);
    read_center("center2", init.center2);
    init.width = number(j, "width", "simulation.initial");
    init.height = number(j, "height", "simulation.initial");
    init.height2 = number_or(j, "height2", init.height);
  } else if (preset == "cosine") {
    init.preset = InitialCondition::Preset::cosine;
    init.mean = number(j, "mean", "simulation.initial");
    init.amplitude = number(j, "amplitude", "simulation.initial");
    init.mode = j.contains("mode") ? j.at("mode").get<int>() : 1;
  } else if (preset == "tabulated") {
    init.preset = InitialCondition::Preset::tabulated;
    init.table = load_table(base, j, "simulation.initial");
  } else {
    fail("simulation.initial.preset", "unknown preset '" + preset + "'");
  }
  return init;
}

SimulationConfig parse_simulation(const json& j, const std::filesystem::path& base) {
  SimulationConfig cfg;
  cfg.grid = parse_grid(member(j, "grid", "simulation"));
  cfg.saturation = parse_saturation(member(j, "saturation", "simulation"), base);
  cfg.energy = parse_energy(member(j, "energy", "simulation"));
  const json& pots = member(j, "potentials", "simulation");
  parse_potential(member(pots, "V", "simulation.potentials"), "simulation.potentials.V",
                  base, cfg.potentials.v_kind, cfg.potentials.v_table);
  parse_potential(member(pots, "W", "simulation.potentials"), "simulation.potentials.W",
                  base, cfg.potentials.w_kind, cfg.potentials.w_table);
  cfg.initial = parse_initial(member(j, "initial", "simulation"), base);
  cfg.t_end = number(j, "t_end", "simulation");
  cfg.cfl = number_or(j, "cfl", 0.9);
  cfg.snapshot_every =
      j.contains("snapshot_every") ? j.at("snapshot_every").get<int>() : 100;
  if (j.contains("dt_override") && !j.at("dt_override").is_null())
    cfg.dt_override = j.at("dt_override").get<double>();
  cfg.validate();
  return cfg;
}

DiagnosticsBlock parse_diagnostics(const json& j, int dim) {
  DiagnosticsBlock block;
  if (j.contains("cascade")) {
    const json& c = j.at("cascade");
    CascadeBlock cb;
    for (const auto& v : member(c, "vertices", "diagnostics.cascade")) {
      const auto vertex = v.get<std::vector<double>>();
      if (int(vertex.size()) != dim + 1)
        fail("diagnostics.cascade.vertices", "each vertex needs dim spatial entries plus a time");
      cb.vertices.push_back(vertex);
    }
    cb.radius = number(c, "radius", "diagnostics.cascade");
    cb.options.epsilon = number_or(c, "epsilon", cb.options.epsilon);
    if (c.contains("eta")) cb.options.eta = c.at("eta").get<double>();
    if (c.contains("gamma")) cb.options.gamma = c.at("gamma").get<double>();
    if (c.contains("levels")) cb.options.max_levels = c.at("levels").get<int>();
    if (c.contains("min_samples")) cb.options.min_samples = c.at("min_samples").get<int>();
    block.cascade = cb;
  }
  if (j.contains("classifier"))
    block.classifier_nu = number(j.at("classifier"), "nu", "diagnostics.classifier");
  if (j.contains("convergence")) {
    const json& c = j.at("convergence");
    ConvergenceBlock cv;
    cv.tail_fraction = number_or(c, "tail_fraction", cv.tail_fraction);
    cv.gap_tol = number_or(c, "gap_tol", cv.gap_tol);
    cv.residual_tol = number_or(c, "residual_tol", cv.residual_tol);
    block.convergence = cv;
  }
  return block;
}

}  // namespace

Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  m.name = member(j, "name", "manifest").get<std::string>();
  if (m.name.empty()) fail("manifest.name", "must be nonempty");
  m.simulation = parse_simulation(member(j, "simulation", "manifest"), base_dir);
  if (j.contains("diagnostics"))
    m.diagnostics = parse_diagnostics(j.at("diagnostics"), m.simulation.grid.dim);
  if (j.contains("verify")) {
    if (!j.at("verify").is_array()) fail("manifest.verify", "must be an array");
    m.verify = j.at("verify");
  } else {
    m.verify = nlohmann::json::array();
  }
  if (j.contains("output")) m.output_dir = resolve(base_dir, j.at("output").get<std::string>());
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_manifest(j, path.parent_path());
}

}  // namespace satdiff
