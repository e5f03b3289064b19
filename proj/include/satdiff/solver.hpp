#pragma once

#include <optional>
#include <string>
#include <vector>

#include "satdiff/errors.hpp"
#include "satdiff/mesh.hpp"
#include "satdiff/model.hpp"

namespace satdiff {

/// Deterministic initial-datum presets; no RNG anywhere in a run.
struct InitialCondition {
  enum class Preset { constant, gaussian_bump, two_bumps, cosine, tabulated };

  Preset preset = Preset::constant;
  double value = 0.5;                    // constant
  std::array<double, 2> center{0.5, 0.5};  // gaussian_bump
  double width = 0.1;
  double height = 0.5;
  std::array<double, 2> center2{0.75, 0.75};  // second bump
  double height2 = 0.5;
  double mean = 0.5;  // cosine: mean + amplitude * prod_a cos(k pi (x-lo)/L)
  double amplitude = 0.25;
  int mode = 1;
  PiecewiseLinear table;  // tabulated, 1D only

  Eigen::ArrayXd sample(const Grid& g) const;
};

struct SimulationConfig {
  Grid grid;
  SaturationSpec saturation;
  EnergyDensity energy;
  PotentialSpec potentials;
  InitialCondition initial;
  double t_end = 1.0;
  double cfl = 0.9;
  int snapshot_every = 100;
  std::optional<double> dt_override;

  void validate() const;  // throws ConfigError with a field path
};

/// Per accepted step: time, dt used, mass, free energy, dissipation, bounds.
struct EnergyLedger {
  std::vector<double> time, dt, mass, free_energy, dissipation, min_rho, max_rho;

  std::size_t rows() const { return time.size(); }
  void append(double t, double dt_used, double m, double f, double d, double lo,
              double hi);
};

struct RunResult {
  Trajectory trajectory;
  EnergyLedger ledger;
};

/// Persistent step rejection; carries the last admissible state for dumping.
class SolverAbort : public std::runtime_error {
 public:
  SolverAbort(const std::string& what, DensityField last_state, double t)
      : std::runtime_error(what), last_state(std::move(last_state)), t(t) {}
  DensityField last_state;
  double t;
};

/// Advection velocity -grad(V + W*rho) per interior face; boundary faces zero.
FaceField drift_velocity(const DensityField& field, const PotentialSpec& pots);

/// Upwind drift flux with the mobility split m = rho sigma(rho) -> donor rho,
/// receiver sigma: F = v+ rho_L sigma(rho_R) + v- rho_R sigma(rho_L). Vanishes
/// when the donor is empty or the receiver saturated.
double face_flux(double rho_l, double rho_r, double v, const SaturationSpec& spec);

/// Semi-discrete rate: div(grad Phi(rho)) - div(upwind drift flux). The cell
/// sum times h^N telescopes to zero.
Eigen::ArrayXd rhs(const DensityField& field, const SimulationConfig& config);

/// cfl * min(diffusive bound h^2/(2N L_Phi), drift bound h/(max|v| M')).
double cfl_dt(const DensityField& field, const SimulationConfig& config);

/// One forward-Euler update. Mass is conserved to rounding; a bound violation
/// beyond 1e-12 raises StepRejected (caller halves dt, up to 40 times).
DensityField step(const DensityField& field, double dt, const SimulationConfig& config);

/// Integrate to t_end, recording a ledger row per accepted step and a snapshot
/// every snapshot_every accepted steps (plus the initial and final states).
RunResult run(const SimulationConfig& config);

/// dissipation(field) + sup-norm of rhs(field); vanishes (to tolerance) at
/// discrete stationary states.
double stationary_residual(const DensityField& field, const SimulationConfig& config);

}  // namespace satdiff
