#pragma once

#include <map>
#include <string>

#include "satdiff/diagnostics.hpp"
#include "satdiff/mesh.hpp"
#include "satdiff/model.hpp"

namespace satdiff {

/// Truncation (rho - k)_+ or (rho - k)_-, both nonnegative cellwise.
struct Truncation {
  double level = 0.0;
  int sign = +1;  // +1 or -1
};

Eigen::ArrayXd truncate(const Eigen::ArrayXd& rho, const Truncation& trunc);

struct LevelSetMeasure {
  double total = 0.0;                            // space-time measure
  std::vector<std::pair<double, double>> slices;  // (t, spatial measure)
};

/// Measure of {x in B_r : +-rho > +-k} per snapshot slice inside the cylinder,
/// count x h^N, integrated in time with the snapshot spacing.
LevelSetMeasure level_set_measure(const Trajectory& traj, const Cylinder& cyl, double k,
                                  int sign);

/// Nonnegative logarithmic weight (log(a / ((a+c) - (s-b)_+-)))_+ with
/// a > c > 0. Bounded by log(a/c) and with |derivative| <= 1/c on the domain
/// (s-b)_+- <= a; beyond that the formula is singular and rejected.
double psi_log(double a, double b, double c, int sign, double s);

/// Separable space-time cutoff: 1 on the inner cylinder, 0 on the parabolic
/// boundary of the outer one, ramped in between (linear or C^1 cubic).
/// Derivatives come from the ramp profiles analytically, not from samples.
struct CutoffFunction {
  enum class Profile { linear_ramp, smoothed };

  Cylinder outer, inner;
  Profile profile = Profile::linear_ramp;
  int dim = 1;

  double value(const double* x, double t) const;
  double time_derivative(const double* x, double t) const;
  double grad_norm(const double* x, double t) const;
  double laplacian(const double* x, double t) const;  // radial part; ramp kinks carry none

  // recorded construction bounds
  double max_grad = 0.0;
  double max_dt = 0.0;
  double max_lap = 0.0;
};

CutoffFunction build_cutoff(const Cylinder& outer, const Cylinder& inner,
                            CutoffFunction::Profile profile, int dim);

struct EstimateReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;  // the leading constant entering the rhs
  double ratio = 0.0;
  double slack = 0.0;
  bool pass = false;
  std::map<std::string, double> terms;
};

struct CheckOptions {
  double slack = 0.10;
  double c1 = 10.0;  // gradient-of-cutoff term
  double c2 = 10.0;  // zeta dt-zeta term
  double degiorgi_cn = 0.0;  // 0 resolves to 4N
  double kappa = 0.0;        // 0 resolves to 1 + 4/N
  double b_hat = 0.0;        // 0 resolves to 2/(N+4)
};

/// Truncation energy inequality: ess-sup + gradient terms against the initial
/// slice, cutoff-gradient, time-ramp, and level-set terms with constants
/// C1 = C2 = 10 and 4 sigma_max Lambda.
EstimateReport caccioppoli_check(const Trajectory& traj, const Cylinder& cyl, double k,
                                 int sign, const CutoffFunction& zeta,
                                 const SaturationSpec& spec, const PotentialSpec& pots,
                                 const CheckOptions& opts = {});

/// Logarithmic energy inequality with constants 6 and 3 sigma_max Lambda^2.
EstimateReport log_estimate_check(const Trajectory& traj, const Cylinder& cyl, double k,
                                  double c, int sign, const CutoffFunction& zeta,
                                  const SaturationSpec& spec, const PotentialSpec& pots,
                                  const CheckOptions& opts = {});

/// Isoperimetric inequality on a discrete ball:
/// (k0-k1)|v>k0| <= C(N) r^{N+1} / |v<k1| * integral of |grad v| over the band.
EstimateReport degiorgi_check(const DensityField& field,
                              const std::array<double, 2>& center, double r, double k0,
                              double k1, const CheckOptions& opts = {});

struct GeometricSequence {
  std::vector<double> Y, Z;
  bool converged = false;
  double threshold = 0.0;  // smallness condition on Y0 + Z0^{1+kappa}
};

/// Iterates Y_{n+1} = C b^n (Y_n^{1+u} + Y_n^u Z_n^{1+k}),
/// Z_{n+1} = C b^n (Y_n + Z_n^{1+k}) with equality; reports the smallness
/// threshold (2C)^{-(1+k)/d} b^{-(1+k)/d^2}, d = min(k, u).
GeometricSequence geometric_convergence(double y0, double z0, double C, double b,
                                        double kappa, double upsilon, int n_max);

/// Smooth space-time test functions vanishing at the final time.
struct SpaceTimeTestFunction {
  enum class Space { constant, cosine };
  Space space = Space::cosine;
  int mode = 1;
  int time_power = 2;  // (1 - t/T)^p
  double t_final = 1.0;

  double value(const Grid& g, const double* x, double t) const;
  double time_derivative(const Grid& g, const double* x, double t) const;
  double gradient(const Grid& g, const double* x, double t, int axis) const;
};

/// Integrated weak-form defect of a trajectory against one test function;
/// O(h^2 + dt) small for solver output.
double weak_form_residual(const Trajectory& traj, const SpaceTimeTestFunction& test,
                          const SaturationSpec& spec, const PotentialSpec& pots);

}  // namespace satdiff
