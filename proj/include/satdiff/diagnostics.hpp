#pragma once

#include <optional>
#include <vector>

#include "satdiff/mesh.hpp"
#include "satdiff/model.hpp"
#include "satdiff/solver.hpp"

namespace satdiff {

/// Backward space-time cylinder B_r(x0) x (t0 - height, t0], vertexed at
/// (x0, t0). The intrinsic flag marks heights of the form theta * r^2.
struct Cylinder {
  std::array<double, 2> center{0.5, 0.5};
  double t_vertex = 0.0;
  double radius = 0.0;
  double height = 0.0;
  bool intrinsic = false;
  double theta = 0.0;

  /// Lebesgue measure height * |B_r|.
  double measure(int dim) const;
  bool contains_space(double x, double y, int dim) const;
  bool contains_time(double t) const;
  std::string describe(int dim) const;
};

/// theta = 1 / (c0 (omega/4)^beta): time stretch absorbing the degeneracy.
/// Reduces to 1 in the validation mode (beta = 0, c0 = 1).
double intrinsic_theta(double omega, const SaturationSpec& spec);

Cylinder intrinsic_cylinder(const std::array<double, 2>& vertex_x, double t_vertex,
                            double radius, double omega, const SaturationSpec& spec);

/// Indices of the grid samples (cells, snapshots) covered by a cylinder;
/// shared by every cylinder scan.
struct CylinderSamples {
  std::vector<int> cell_indices;
  std::size_t first_snapshot = 0, last_snapshot = 0;  // inclusive
  std::size_t slice_count() const { return last_snapshot - first_snapshot + 1; }
  std::size_t count() const { return cell_indices.size() * slice_count(); }
};
CylinderSamples collect_samples(const Trajectory& traj, const Cylinder& cyl);

/// Exact sup minus inf over the cylinder's samples (discrete fields have no
/// null sets, so essential and plain oscillation coincide).
double ess_osc(const Trajectory& traj, const Cylinder& cyl);

struct CascadeLevel {
  int k = 0;
  double radius = 0.0;
  double theta = 0.0;
  double height = 0.0;
  double omega = 0.0;          // measured over this level's cylinder
  double omega_apriori = 0.0;  // gamma^{k-1} * omega_1 comparison sequence
  bool height_clamped = false;    // shrunk to keep the cylinders nested
  bool radius_dominated = false;  // R^epsilon <= 1/theta <= c0 violated
};

struct OscillationRecord {
  std::vector<CascadeLevel> levels;
  double initial_osc = 0.0;  // over the enclosing Q(R^{2-epsilon}, R)
  double eta = 0.0;
  double gamma_factor = 0.0;
  double epsilon = 0.0;
  bool fit_valid = false;
  double alpha = 0.0;
  double big_gamma = 0.0;
  double residual = 0.0;
  bool truncated = false;  // sample starvation cut the cascade short
};

struct CascadeOptions {
  double epsilon = 0.25;  // height exponent of the enclosing cylinder
  std::optional<double> eta;
  std::optional<double> gamma;  // default 1 - 2^{-5}
  int max_levels = 8;
  int min_samples = 8;
};

/// Nested intrinsic cylinders R_k = eta^{k-1} R with theta taken from the
/// measured oscillation of the previous level; fits log omega_k against
/// log R_k for the decay exponent.
OscillationRecord oscillation_cascade(const Trajectory& traj,
                                      const std::array<double, 2>& vertex_x,
                                      double t_vertex, double radius,
                                      const SaturationSpec& spec,
                                      const CascadeOptions& opts = {});

struct AlternativeReport {
  bool first = false;
  double fraction_high = 0.0;  // fraction of samples with rho > rho_max - omega/2
  double fraction_low = 0.0;   // fraction with rho < omega/2
  double nu = 0.0;
  double level_high = 0.0;
  double level_low = 0.0;
  double mu_plus = 0.0, mu_minus = 0.0;  // measured extremes over the cylinder
  double cylinder_measure = 0.0;
  long samples = 0;
};

/// Dichotomy on the near-saturation set: first when the sampled fraction
/// above rho_max - omega/2 is at most nu.
AlternativeReport alternative_classify(const Trajectory& traj, const Cylinder& cyl,
                                       double omega, double nu, double rho_max = 1.0);

/// Forward sliding mean over [t, t + window], exact for trajectories that are
/// piecewise linear in time; output truncated to t <= T - window.
Trajectory steklov_average(const Trajectory& traj, double window);

struct ConvergenceReport {
  DensityField rho_inf;
  std::vector<double> times;
  std::vector<double> gaps;  // sup distance to the final snapshot
  bool converged = false;
  double final_gap = 0.0;
  double residual = 0.0;  // stationary residual of rho_inf, when a config is given
};

ConvergenceReport convergence_monitor(const Trajectory& traj, double tail_fraction,
                                      double gap_tol,
                                      const SimulationConfig* config = nullptr,
                                      double residual_tol = 0.0);

}  // namespace satdiff
