#include "satdiff/model.hpp"

#include <cmath>
#include <stdexcept>

#include "satdiff/errors.hpp"

namespace satdiff {

namespace {

// integer exponents dominate the hot loops; avoid generic pow there
double power_of(double base, double m) {
  const int mi = int(m);
  if (double(mi) == m && mi >= 0 && mi <= 8) {
    double r = 1.0;
    for (int k = 0; k < mi; ++k) r *= base;
    return r;
  }
  return std::pow(base, m);
}

void check_density_domain(double s, double rho_max) {
  if (s < -1e-12 || s > rho_max + 1e-12)
    throw std::domain_error("density outside [0, rho_max]");
}

}  // namespace

SaturationSpec SaturationSpec::power(double m, double rho_max) {
  SaturationSpec s;
  s.form = Form::power;
  s.rho_max = rho_max;
  s.exponent = m;
  s.beta = m;
  s.c0 = 1.0;
  s.c1 = 1.0;
  s.validate();
  return s;
}

SaturationSpec SaturationSpec::tabulated(PiecewiseLinear table, double beta, double c0,
                                         double c1, double rho_max) {
  SaturationSpec s;
  s.form = Form::tabulated;
  s.rho_max = rho_max;
  s.beta = beta;
  s.c0 = c0;
  s.c1 = c1;
  s.table = std::move(table);
  s.validate();
  return s;
}

SaturationSpec SaturationSpec::validation_constant(double rho_max) {
  SaturationSpec s;
  s.form = Form::constant_one;
  s.rho_max = rho_max;
  s.beta = 0.0;
  s.c0 = 1.0;
  s.c1 = 1.0;
  s.validate();
  return s;
}

void SaturationSpec::validate() const {
  if (!(rho_max > 0)) throw ConfigError("saturation.rho_max: must be positive");
  if (!(c0 > 0) || !(c1 >= c0))
    throw ConfigError("saturation.c0/c1: need 0 < c0 <= c1");
  switch (form) {
    case Form::power:
      if (!(exponent > 0)) throw ConfigError("saturation.m: must be positive");
      break;
    case Form::tabulated: {
      if (!(beta > 0)) throw ConfigError("saturation.beta: must be positive");
      if (table.empty()) throw ConfigError("saturation.table: missing");
      if (std::abs(table.front()) > 1e-12 || std::abs(table.back() - rho_max) > 1e-12)
        throw ConfigError("saturation.table: knots must span [0, rho_max]");
      if (table.values().back() != 0.0)
        throw ConfigError("saturation.table: sigma(rho_max) must be exactly 0");
      for (double y : table.values())
        if (y < 0.0) throw ConfigError("saturation.table: sigma must be nonnegative");
      break;
    }
    case Form::constant_one:
      break;
  }
}

double sigma(const SaturationSpec& spec, double s) {
  check_density_domain(s, spec.rho_max);
  s = std::clamp(s, 0.0, spec.rho_max);
  switch (spec.form) {
    case SaturationSpec::Form::power:
      return power_of(spec.rho_max - s, spec.exponent);
    case SaturationSpec::Form::tabulated:
      return s == spec.rho_max ? 0.0 : spec.table(s);
    case SaturationSpec::Form::constant_one:
      return 1.0;
  }
  return 0.0;
}

double sigma_primitive(const SaturationSpec& spec, double s) {
  check_density_domain(s, spec.rho_max);
  s = std::clamp(s, 0.0, spec.rho_max);
  switch (spec.form) {
    case SaturationSpec::Form::power: {
      const double mp1 = spec.exponent + 1.0;
      return (power_of(spec.rho_max, mp1) - power_of(spec.rho_max - s, mp1)) / mp1;
    }
    case SaturationSpec::Form::tabulated:
      return spec.table.integral_from_front(s);
    case SaturationSpec::Form::constant_one:
      return s;
  }
  return 0.0;
}

double sigma_max(const SaturationSpec& spec) {
  switch (spec.form) {
    case SaturationSpec::Form::power:
      return power_of(spec.rho_max, spec.exponent);
    case SaturationSpec::Form::tabulated:
      return spec.table.max_value();
    case SaturationSpec::Form::constant_one:
      return 1.0;
  }
  return 0.0;
}

double mobility_slope_bound(const SaturationSpec& spec) {
  // sampled bound on |d/ds (s sigma)|; exact enough for a CFL guard, and the
  // step driver halves on rejection anyway
  const int n = 4096;
  double bound = 0.0;
  double prev = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = spec.rho_max * double(i) / n;
    const double m = s * sigma(spec, s);
    if (i > 0) bound = std::max(bound, std::abs(m - prev) / (spec.rho_max / n));
    prev = m;
  }
  return bound;
}

EnergyDensity EnergyDensity::boltzmann() { return EnergyDensity{Kind::boltzmann, 0.0}; }

EnergyDensity EnergyDensity::porous(double m) {
  if (!(m > 1.0)) throw ConfigError("energy.m: porous exponent must exceed 1");
  return EnergyDensity{Kind::porous, m};
}

double EnergyDensity::value(double s) const {
  if (s < 0) throw std::domain_error("energy density of a negative value");
  if (kind == Kind::boltzmann) return s == 0.0 ? 0.0 : s * (std::log(s) - 1.0);
  return std::pow(s, m) / (m - 1.0);
}

double EnergyDensity::derivative(double s) const {
  if (kind == Kind::boltzmann) return std::log(s);
  return m / (m - 1.0) * std::pow(s, m - 1.0);
}

DiffusionPrimitive::DiffusionPrimitive(const EnergyDensity& energy,
                                       const SaturationSpec& spec)
    : spec_(spec) {
  if (energy.kind == EnergyDensity::Kind::boltzmann) {
    use_sigma_primitive_ = true;
    // slope of the primitive is sigma itself
    max_slope_ = sigma_max(spec);
    return;
  }
  use_sigma_primitive_ = false;
  // Phi'(s) = m s^{m-1} sigma(s): tabulate the cumulative trapezoid once
  const int n = 1 << 16;
  std::vector<double> xs(n + 1), ys(n + 1);
  const double h = spec.rho_max / n;
  double prev_slope = 0.0;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = spec.rho_max * double(i) / n;
    const double slope = energy.m * std::pow(s, energy.m - 1.0) * sigma(spec, s);
    if (i > 0) acc += 0.5 * (slope + prev_slope) * h;
    xs[i] = s;
    ys[i] = acc;
    prev_slope = slope;
    max_slope_ = std::max(max_slope_, slope);
  }
  table_ = PiecewiseLinear(std::move(xs), std::move(ys));
}

double DiffusionPrimitive::operator()(double s) const {
  if (use_sigma_primitive_) return sigma_primitive(spec_, s);
  check_density_domain(s, spec_.rho_max);
  return table_(std::clamp(s, 0.0, spec_.rho_max));
}

PotentialSpec PotentialSpec::none() { return PotentialSpec{}; }

PotentialSpec PotentialSpec::quadratic_confinement() {
  PotentialSpec p;
  p.v_kind = Preset::quadratic;
  return p;
}

PotentialSpec PotentialSpec::quadratic_interaction() {
  PotentialSpec p;
  p.w_kind = Preset::quadratic;
  return p;
}

static double eval_preset(PotentialSpec::Preset kind, const PiecewiseLinear& table,
                          const double* x, int dim) {
  switch (kind) {
    case PotentialSpec::Preset::zero:
      return 0.0;
    case PotentialSpec::Preset::quadratic: {
      double r2 = 0.0;
      for (int a = 0; a < dim; ++a) r2 += x[a] * x[a];
      return 0.5 * r2;
    }
    case PotentialSpec::Preset::tabulated:
      if (dim != 1)
        throw ConfigError("tabulated potentials are supported on 1D grids only");
      return table(x[0]);
  }
  return 0.0;
}

double PotentialSpec::v_at(const double* x, int dim) const {
  return eval_preset(v_kind, v_table, x, dim);
}

double PotentialSpec::w_at(const double* d, int dim) const {
  return eval_preset(w_kind, w_table, d, dim);
}

Eigen::ArrayXd potential_on_grid(const Grid& g, const PotentialSpec& pots) {
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(g.cell_count());
  if (!pots.has_v()) return out;
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double x[2] = {g.center(0, i), g.dim == 2 ? g.center(1, j) : 0.0};
      out[j * nx + i] = pots.v_at(x, g.dim);
    }
  return out;
}

double lambda_bound(const Grid& g, const PotentialSpec& pots) {
  double grad_v = 0.0;
  if (pots.has_v()) {
    const FaceField fg = face_gradient(g, potential_on_grid(g, pots));
    for (int a = 0; a < g.dim; ++a)
      if (fg.axis[a].size() > 0)
        grad_v = std::max(grad_v, fg.axis[a].abs().maxCoeff());
  }
  double grad_w = 0.0;
  if (pots.has_w()) {
    // difference lattice per axis: offsets k h, |k| <= n-1
    const int nx = g.cells[0];
    const int ny = g.dim == 2 ? g.cells[1] : 1;
    const double hx = g.spacing(0);
    const double hy = g.dim == 2 ? g.spacing(1) : 1.0;
    for (int kj = -(ny - 1); kj <= ny - 1; ++kj)
      for (int ki = -(nx - 1); ki <= nx - 1; ++ki) {
        const double d0[2] = {ki * hx, kj * hy};
        if (ki + 1 <= nx - 1) {
          const double d1[2] = {(ki + 1) * hx, kj * hy};
          grad_w = std::max(grad_w, std::abs(pots.w_at(d1, g.dim) - pots.w_at(d0, g.dim)) / hx);
        }
        if (g.dim == 2 && kj + 1 <= ny - 1) {
          const double d1[2] = {ki * hx, (kj + 1) * hy};
          grad_w = std::max(grad_w, std::abs(pots.w_at(d1, g.dim) - pots.w_at(d0, g.dim)) / hy);
        }
      }
  }
  return 2.0 * std::max(grad_v, grad_w);
}

InteractionKernel::InteractionKernel(const Grid& g, const PotentialSpec& pots)
    : grid_(g), zero_(!pots.has_w()) {
  if (zero_) return;
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  const double hx = g.spacing(0);
  const double hy = g.dim == 2 ? g.spacing(1) : 0.0;
  table_.resize((2 * nx - 1) * (2 * ny - 1));
  for (int kj = 0; kj < 2 * ny - 1; ++kj)
    for (int ki = 0; ki < 2 * nx - 1; ++ki) {
      const double d[2] = {(ki - (nx - 1)) * hx, (kj - (ny - 1)) * hy};
      table_[kj * (2 * nx - 1) + ki] = pots.w_at(d, g.dim);
    }
}

Eigen::ArrayXd InteractionKernel::apply(const Eigen::ArrayXd& rho) const {
  if (rho.size() != grid_.cell_count())
    throw std::invalid_argument("convolution input does not match the kernel grid");
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(rho.size());
  if (zero_) return out;
  const int nx = grid_.cells[0];
  const int ny = grid_.dim == 2 ? grid_.cells[1] : 1;
  const double vol = grid_.cell_volume();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double acc = 0.0;
      for (int q = 0; q < ny; ++q) {
        const double* wrow = table_.data() + (j - q + ny - 1) * (2 * nx - 1) + (nx - 1);
        const double* rrow = rho.data() + q * nx;
        for (int p = 0; p < nx; ++p) acc += wrow[i - p] * rrow[p];
      }
      out[j * nx + i] = acc * vol;
    }
  return out;
}

DensityField convolve(const DensityField& field, const PotentialSpec& pots) {
  InteractionKernel kernel(field.grid, pots);
  return DensityField{field.grid, kernel.apply(field.values)};
}

double free_energy(const DensityField& field, const EnergyDensity& energy,
                   const PotentialSpec& pots, const Eigen::ArrayXd* precomputed_conv) {
  for (Eigen::Index i = 0; i < field.values.size(); ++i)
    if (field.values[i] < 0.0)
      throw std::domain_error("free_energy: negative density");

  const Grid& g = field.grid;
  Eigen::ArrayXd conv;
  const Eigen::ArrayXd* wrho = precomputed_conv;
  if (wrho == nullptr && pots.has_w()) {
    conv = convolve(field, pots).values;
    wrho = &conv;
  }
  const Eigen::ArrayXd vgrid = potential_on_grid(g, pots);

  CompensatedSum s;
  for (Eigen::Index i = 0; i < field.values.size(); ++i) {
    const double rho = field.values[i];
    double term = energy.value(rho) + rho * vgrid[i];
    if (wrho != nullptr) term += 0.5 * rho * (*wrho)[i];
    s.add(term);
  }
  return s.value() * g.cell_volume();
}

namespace {

// face contribution of the entropy production along one axis pair (L, R)
double face_dissipation(double rho_l, double rho_r, double xi_drift_l,
                        double xi_drift_r, double h, const EnergyDensity& energy,
                        const SaturationSpec& spec) {
  const bool boltz = energy.kind == EnergyDensity::Kind::boltzmann;
  if (boltz && (rho_l <= 0.0 || rho_r <= 0.0)) return 0.0;
  const double dxi = (energy.derivative(rho_r) - energy.derivative(rho_l)) +
                     (xi_drift_r - xi_drift_l);
  // donor is the cell the gradient-flow flux leaves: flux direction -grad xi
  const double mob = dxi < 0.0 ? rho_l * sigma(spec, rho_r) : rho_r * sigma(spec, rho_l);
  const double slope = dxi / h;
  return mob * slope * slope;
}

}  // namespace

double dissipation(const DensityField& field, const EnergyDensity& energy,
                   const PotentialSpec& pots, const SaturationSpec& spec,
                   const Eigen::ArrayXd* precomputed_conv) {
  const Grid& g = field.grid;
  for (Eigen::Index i = 0; i < field.values.size(); ++i)
    check_density_domain(field.values[i], spec.rho_max);

  Eigen::ArrayXd drift = potential_on_grid(g, pots);
  if (precomputed_conv != nullptr) {
    drift += *precomputed_conv;
  } else if (pots.has_w()) {
    drift += convolve(field, pots).values;
  }

  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  CompensatedSum s;
  const double hx = g.spacing(0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const int l = j * nx + i, r = l + 1;
      s.add(face_dissipation(field.values[l], field.values[r], drift[l], drift[r], hx,
                             energy, spec));
    }
  if (g.dim == 2) {
    const double hy = g.spacing(1);
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int l = j * nx + i, r = l + nx;
        s.add(face_dissipation(field.values[l], field.values[r], drift[l], drift[r], hy,
                               energy, spec));
      }
  }
  return s.value() * g.cell_volume();
}

}  // namespace satdiff
