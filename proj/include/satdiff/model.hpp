#pragma once

#include <optional>

#include "satdiff/mesh.hpp"
#include "satdiff/numerics.hpp"

namespace satdiff {

/// Degeneracy law of the mobility: sigma vanishes at rho_max and the envelope
/// c0 (rho_max - s)^beta <= sigma(s) <= c1 (rho_max - s)^beta holds on the
/// sampled range. The constant_one form is a validation-only mode (plain heat
/// limit) and is exempt from the vanishing/envelope requirements.
struct SaturationSpec {
  enum class Form { power, tabulated, constant_one };

  Form form = Form::power;
  double rho_max = 1.0;
  double exponent = 2.0;  // m in (rho_max - s)^m
  double beta = 2.0;      // envelope exponent
  double c0 = 1.0;
  double c1 = 1.0;
  PiecewiseLinear table;  // tabulated form only

  static SaturationSpec power(double m, double rho_max = 1.0);
  static SaturationSpec tabulated(PiecewiseLinear table, double beta, double c0,
                                  double c1, double rho_max = 1.0);
  static SaturationSpec validation_constant(double rho_max = 1.0);

  bool degenerate() const { return form != Form::constant_one; }
  void validate() const;
};

/// sigma(s); exact zero at s = rho_max for degenerate forms.
double sigma(const SaturationSpec& spec, double s);

/// Primitive of the mobility factor, integral of sigma from 0 to s. Strictly
/// increasing below rho_max; closed form for the power law, exact integral of
/// the interpolant for tables.
double sigma_primitive(const SaturationSpec& spec, double s);

double sigma_max(const SaturationSpec& spec);

/// max_s |d/ds [s sigma(s)]|, the drift CFL slope bound.
double mobility_slope_bound(const SaturationSpec& spec);

struct EnergyDensity {
  enum class Kind { boltzmann, porous };
  Kind kind = Kind::boltzmann;
  double m = 2.0;  // porous exponent, > 1

  static EnergyDensity boltzmann();
  static EnergyDensity porous(double m);

  double value(double s) const;       // U(s), with U(0) = 0 for both kinds
  double derivative(double s) const;  // U'(s); -inf at 0 for boltzmann
};

/// Primitive of the diffusion coefficient: Phi' = U''(s) s sigma(s) with
/// Phi(0) = 0. Boltzmann collapses to the sigma primitive; porous is
/// integrated once and cached as a monotone table.
class DiffusionPrimitive {
 public:
  DiffusionPrimitive(const EnergyDensity& energy, const SaturationSpec& spec);
  double operator()(double s) const;
  double max_slope() const { return max_slope_; }

 private:
  SaturationSpec spec_;
  bool use_sigma_primitive_ = true;
  PiecewiseLinear table_;
  double max_slope_ = 0.0;
};

/// Confinement potential V and interaction kernel W. Presets: zero,
/// quadratic |x|^2/2, or a tabulated 1D profile; W is evaluated on the
/// difference set {x - y : x, y in Omega}, which a tabulated W must cover.
struct PotentialSpec {
  enum class Preset { zero, quadratic, tabulated };

  Preset v_kind = Preset::zero;
  Preset w_kind = Preset::zero;
  PiecewiseLinear v_table;
  PiecewiseLinear w_table;

  static PotentialSpec none();
  static PotentialSpec quadratic_confinement();
  static PotentialSpec quadratic_interaction();

  bool has_v() const { return v_kind != Preset::zero; }
  bool has_w() const { return w_kind != Preset::zero; }

  double v_at(const double* x, int dim) const;
  /// W evaluated at a difference vector.
  double w_at(const double* d, int dim) const;
};

/// V sampled at cell centers.
Eigen::ArrayXd potential_on_grid(const Grid& g, const PotentialSpec& pots);

/// Lambda = 2 max{||grad V||, ||grad W||}, both taken as discrete sup norms:
/// V differenced on the grid's faces, W on the difference lattice.
double lambda_bound(const Grid& g, const PotentialSpec& pots);

/// Dense interaction kernel on the difference lattice; apply() performs the
/// midpoint-quadrature convolution (W * rho)(x_i) = sum_j W(x_i - x_j) rho_j h^N.
class InteractionKernel {
 public:
  InteractionKernel(const Grid& g, const PotentialSpec& pots);
  bool zero() const { return zero_; }
  Eigen::ArrayXd apply(const Eigen::ArrayXd& rho) const;
  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  bool zero_ = true;
  Eigen::ArrayXd table_;  // (2nx-1) x (2ny-1) offsets, x fastest
};

DensityField convolve(const DensityField& field, const PotentialSpec& pots);

/// F[rho] = integral of U(rho) + rho V + (1/2) rho (W*rho), midpoint rule.
/// The optional precomputed convolution must be W*rho on the same grid.
double free_energy(const DensityField& field, const EnergyDensity& energy,
                   const PotentialSpec& pots,
                   const Eigen::ArrayXd* precomputed_conv = nullptr);

/// Entropy-production rate: sum over interior faces of the face mobility times
/// |grad(U'(rho) + V + W*rho)|^2 h^N. The face mobility is the donor-receiver
/// split rho_d sigma(rho_r) taken along the potential drop, matching the
/// solver flux; faces touching an exactly empty cell contribute zero in the
/// boltzmann mode (the mobility vanishes faster than the log diverges).
double dissipation(const DensityField& field, const EnergyDensity& energy,
                   const PotentialSpec& pots, const SaturationSpec& spec,
                   const Eigen::ArrayXd* precomputed_conv = nullptr);

}  // namespace satdiff
