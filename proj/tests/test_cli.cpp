#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "satdiff/cli.hpp"

using namespace satdiff;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json minimal_manifest(const std::string& name) {
  json j;
  j["name"] = name;
  j["simulation"] = {
      {"grid", {{"dim", 1}, {"cells", {32}}, {"lo", {0.0}}, {"hi", {1.0}}}},
      {"saturation", {{"form", "power"}, {"m", 2.0}}},
      {"energy", {{"kind", "boltzmann"}}},
      {"potentials", {{"V", {{"preset", "zero"}}}, {"W", {{"preset", "zero"}}}}},
      {"initial", {{"preset", "constant"}, {"value", 0.5}}},
      {"t_end", 0.0},
      {"cfl", 0.9},
      {"snapshot_every", 10}};
  return j;
}

fs::path scratch_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "satdiff_cli_test" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_manifest(const fs::path& dir, const json& j) {
  const fs::path p = dir / (j.at("name").get<std::string>() + ".json");
  std::ofstream os(p);
  os << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

}  // namespace

TEST_CASE("manifest parsing: happy path and field-path errors") {
  const fs::path dir = scratch_dir("parse");
  const json good = minimal_manifest("ok");
  const Manifest m = parse_manifest(good, dir);
  CHECK(m.name == "ok");
  CHECK(m.simulation.grid.cells[0] == 32);
  CHECK(m.verify.empty());

  json bad = minimal_manifest("bad-cfl");
  bad["simulation"]["cfl"] = 0.0;
  try {
    parse_manifest(bad, dir);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("simulation.cfl") != std::string::npos);
  }

  json missing = minimal_manifest("no-grid");
  missing["simulation"].erase("grid");
  CHECK_THROWS_AS(parse_manifest(missing, dir), ConfigError);
}

TEST_CASE("cmd_run: t_end = 0 emits a single-snapshot trajectory, exit 0") {
  const fs::path dir = scratch_dir("run0");
  const Manifest m = parse_manifest(minimal_manifest("still"), dir);
  CHECK(cli::cmd_run(m, dir / "out") == cli::exit_ok);

  const Trajectory traj = read_trajectory(dir / "out" / "still.traj");
  CHECK(traj.snapshots() == 1);
  const EnergyLedger ledger = cli::read_ledger_csv(dir / "out" / "still_ledger.csv");
  CHECK(ledger.rows() == 1);
  const json summary = json::parse(slurp(dir / "out" / "still_summary.json"));
  CHECK(summary.at("mass").get<double>() == doctest::Approx(0.5));
  CHECK(!summary.contains("wall_time"));
}

TEST_CASE("dispatch exit codes: invalid config is 2, pair guard is 2") {
  const fs::path dir = scratch_dir("codes");
  json bad = minimal_manifest("bad");
  bad["simulation"]["cfl"] = 0.0;
  const fs::path bad_path = write_manifest(dir, bad);
  const fs::path out = dir / "o";
  {
    const char* argv[] = {"satdiff", "run", "--manifest", bad_path.c_str(),
                          "--out",   out.c_str()};
    CHECK(cli::dispatch(6, argv) == cli::exit_config_error);
  }

  // pair refuses W != 0, citing the contraction hypothesis
  json wa = minimal_manifest("wa");
  wa["simulation"]["potentials"]["W"] = {{"preset", "quadratic"}};
  wa["simulation"]["t_end"] = 0.01;
  json wb = minimal_manifest("wb");
  wb["simulation"]["t_end"] = 0.01;
  const fs::path pa = write_manifest(dir, wa);
  const fs::path pb = write_manifest(dir, wb);
  {
    const char* argv[] = {"satdiff", "pair", "--manifest",   pa.c_str(),
                          "--out",   out.c_str(), "--manifest-b", pb.c_str()};
    CHECK(cli::dispatch(8, argv) == cli::exit_config_error);
  }
}

TEST_CASE("cmd_pair: identical manifests give an identically zero distance column") {
  const fs::path dir = scratch_dir("pair");
  json j = minimal_manifest("twin");
  j["simulation"]["t_end"] = 0.02;
  j["simulation"]["snapshot_every"] = 5;
  const Manifest a = parse_manifest(j, dir);
  json j2 = j;
  j2["name"] = "twin2";
  const Manifest b = parse_manifest(j2, dir);
  CHECK(cli::cmd_pair(a, b, dir / "out") == cli::exit_ok);

  std::ifstream csv(dir / "out" / "twin_vs_twin2_l1.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,l1");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    CHECK(line.substr(line.find(',') + 1) == "0");
    ++rows;
  }
  CHECK(rows >= 2);
}

TEST_CASE("cmd_verify: empty block exits 0; trivial caccioppoli passes; failures exit 1") {
  const fs::path dir = scratch_dir("verify");
  json j = minimal_manifest("ver");
  j["simulation"]["t_end"] = 0.05;
  j["simulation"]["snapshot_every"] = 2;

  const Manifest none = parse_manifest(j, dir);
  CHECK(cli::cmd_run(none, dir / "out") == cli::exit_ok);
  CHECK(cli::cmd_verify(none, dir / "out" / "ver.traj", dir / "out") == cli::exit_ok);

  // k >= rho_max: lhs = 0, passes
  j["verify"] = json::array({{{"check", "caccioppoli"},
                              {"vertex", {0.5, 0.05}},
                              {"radius", 0.2},
                              {"height", 0.04},
                              {"k", {{"value", 1.0}}},
                              {"sign", "+"}}});
  const Manifest trivial = parse_manifest(j, dir);
  CHECK(cli::cmd_verify(trivial, dir / "out" / "ver.traj", dir / "out") == cli::exit_ok);
  const json report =
      json::parse(slurp(dir / "out" / "ver_verify_0_caccioppoli.json"));
  CHECK(report.at("pass").get<bool>());
  CHECK(report.at("lhs").get<double>() == 0.0);

  // an unreachable geometric target fails with exit 1
  j["verify"] = json::array({{{"check", "geometric"},
                              {"Y0", 0.9},
                              {"Z0", 0.9},
                              {"C", 2.0},
                              {"b", 4.0},
                              {"upsilon", 1.0},
                              {"kappa", 1.0},
                              {"n_max", 50}}});
  const Manifest failing = parse_manifest(j, dir);
  CHECK(cli::cmd_verify(failing, dir / "out" / "ver.traj", dir / "out") ==
        cli::exit_verify_failed);
}

TEST_CASE("cmd_analyze: constant trajectory yields all-zero cascade, exit 0") {
  const fs::path dir = scratch_dir("analyze");
  json j = minimal_manifest("flat");
  j["simulation"]["t_end"] = 2.0;
  j["simulation"]["snapshot_every"] = 200;
  j["diagnostics"] = {
      {"cascade",
       {{"vertices", {{0.5, 2.0}}}, {"radius", 0.2}, {"levels", 4}, {"eta", 0.6}}},
      {"classifier", {{"nu", 0.5}}},
      {"convergence", {{"tail_fraction", 0.2}, {"gap_tol", 1e-9}, {"residual_tol", 1e-9}}}};
  const Manifest m = parse_manifest(j, dir);
  REQUIRE(cli::cmd_run(m, dir / "out") == cli::exit_ok);
  CHECK(cli::cmd_analyze(m, dir / "out" / "flat.traj", dir / "out") == cli::exit_ok);

  std::ifstream csv(dir / "out" / "flat_cascade_0.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "k,r,theta,omega");
  std::string row;
  while (std::getline(csv, row)) {
    if (row.empty()) continue;
    CHECK(row.substr(row.rfind(',') + 1) == "0");
  }
  const json summary = json::parse(slurp(dir / "out" / "flat_cascade_0.json"));
  CHECK(!summary.at("fit_valid").get<bool>());
  const json conv = json::parse(slurp(dir / "out" / "flat_convergence.json"));
  CHECK(conv.at("converged").get<bool>());

  CHECK_THROWS_AS(cli::cmd_analyze(m, dir / "missing.traj", dir / "out"), ConfigError);
}

TEST_CASE("emitted files round-trip through their readers") {
  const fs::path dir = scratch_dir("roundtrip");
  json j = minimal_manifest("rt");
  j["simulation"]["t_end"] = 0.03;
  j["simulation"]["snapshot_every"] = 3;
  const Manifest m = parse_manifest(j, dir);
  REQUIRE(cli::cmd_run(m, dir / "out") == cli::exit_ok);

  const Trajectory traj = read_trajectory(dir / "out" / "rt.traj");
  const EnergyLedger ledger = cli::read_ledger_csv(dir / "out" / "rt_ledger.csv");
  CHECK(traj.snapshots() >= 2);
  CHECK(ledger.rows() >= 2);
  CHECK(ledger.mass.front() == doctest::Approx(0.5));

  // determinism: a second run reproduces byte-identical artifacts
  REQUIRE(cli::cmd_run(m, dir / "out2") == cli::exit_ok);
  CHECK(slurp(dir / "out" / "rt.traj") == slurp(dir / "out2" / "rt.traj"));
  CHECK(slurp(dir / "out" / "rt_ledger.csv") == slurp(dir / "out2" / "rt_ledger.csv"));
  CHECK(slurp(dir / "out" / "rt_summary.json") == slurp(dir / "out2" / "rt_summary.json"));
}
