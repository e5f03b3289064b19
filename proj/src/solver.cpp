#include "satdiff/solver.hpp"

#include <cmath>
#include <limits>

namespace satdiff {

Eigen::ArrayXd InitialCondition::sample(const Grid& g) const {
  Eigen::ArrayXd out(g.cell_count());
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  auto gaussian = [&](double x, double y, const std::array<double, 2>& c, double h) {
    double r2 = (x - c[0]) * (x - c[0]);
    if (g.dim == 2) r2 += (y - c[1]) * (y - c[1]);
    return h * std::exp(-r2 / (2.0 * width * width));
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double x = g.center(0, i);
      const double y = g.dim == 2 ? g.center(1, j) : 0.0;
      double v = 0.0;
      switch (preset) {
        case Preset::constant:
          v = value;
          break;
        case Preset::gaussian_bump:
          v = gaussian(x, y, center, height);
          break;
        case Preset::two_bumps:
          v = gaussian(x, y, center, height) + gaussian(x, y, center2, height2);
          break;
        case Preset::cosine: {
          v = amplitude;
          for (int a = 0; a < g.dim; ++a) {
            const double xa = a == 0 ? x : y;
            const double L = g.hi[a] - g.lo[a];
            v *= std::cos(mode * M_PI * (xa - g.lo[a]) / L);
          }
          v += mean;
          break;
        }
        case Preset::tabulated:
          if (g.dim != 1)
            throw ConfigError("initial.tabulated: supported on 1D grids only");
          v = table(x);
          break;
      }
      out[j * nx + i] = v;
    }
  return out;
}

void SimulationConfig::validate() const {
  grid.validate();
  saturation.validate();
  if (!(cfl > 0.0) || cfl > 1.0) throw ConfigError("simulation.cfl: must lie in (0, 1]");
  if (t_end < 0.0) throw ConfigError("simulation.t_end: must be nonnegative");
  if (snapshot_every < 1) throw ConfigError("simulation.snapshot_every: must be >= 1");
  if (dt_override && !(*dt_override > 0.0))
    throw ConfigError("simulation.dt_override: must be positive");
  const Eigen::ArrayXd rho0 = initial.sample(grid);
  if (rho0.minCoeff() < 0.0 || rho0.maxCoeff() > saturation.rho_max + 1e-12)
    throw ConfigError("simulation.initial: datum must satisfy 0 <= rho0 <= rho_max");
}

void EnergyLedger::append(double t, double dt_used, double m, double f, double d,
                          double lo, double hi) {
  time.push_back(t);
  dt.push_back(dt_used);
  mass.push_back(m);
  free_energy.push_back(f);
  dissipation.push_back(d);
  min_rho.push_back(lo);
  max_rho.push_back(hi);
}

double face_flux(double rho_l, double rho_r, double v, const SaturationSpec& spec) {
  if (rho_l < -1e-12 || rho_r < -1e-12 || rho_l > spec.rho_max + 1e-12 ||
      rho_r > spec.rho_max + 1e-12)
    throw std::domain_error("face_flux: density outside [0, rho_max]");
  if (v > 0.0) return v * rho_l * sigma(spec, rho_r);
  if (v < 0.0) return v * rho_r * sigma(spec, rho_l);
  return 0.0;
}

namespace {

/// Per-run caches: confinement values, interaction kernel, diffusion
/// primitive, CFL bounds. All state is immutable after construction except
/// the scratch buffers owned by the caller.
struct Workspace {
  explicit Workspace(const SimulationConfig& config)
      : cfg(config),
        vgrid(potential_on_grid(config.grid, config.potentials)),
        kernel(config.grid, config.potentials),
        phi(config.energy, config.saturation),
        slope_bound(mobility_slope_bound(config.saturation)) {}

  const SimulationConfig& cfg;
  Eigen::ArrayXd vgrid;
  InteractionKernel kernel;
  DiffusionPrimitive phi;
  double slope_bound;

  Eigen::ArrayXd drift_potential(const Eigen::ArrayXd& rho,
                                 Eigen::ArrayXd* conv_out = nullptr) const {
    if (kernel.zero()) {
      if (conv_out) conv_out->setZero(rho.size());
      return vgrid;
    }
    Eigen::ArrayXd conv = kernel.apply(rho);
    if (conv_out) *conv_out = conv;
    return vgrid + conv;
  }
};

FaceField drift_faces(const Grid& g, const Eigen::ArrayXd& potential) {
  FaceField v = face_gradient(g, potential);
  for (int a = 0; a < g.dim; ++a) v.axis[a] = -v.axis[a];
  return v;
}

Eigen::ArrayXd rate_of_change(const Workspace& ws, const Eigen::ArrayXd& rho,
                              const FaceField& v) {
  const Grid& g = ws.cfg.grid;
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  const SaturationSpec& sat = ws.cfg.saturation;

  Eigen::ArrayXd phi_of_rho(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) phi_of_rho[i] = ws.phi(rho[i]);
  FaceField total = face_gradient(g, phi_of_rho);

  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      const int f = j * (nx + 1) + i;
      const int l = j * nx + i - 1, r = j * nx + i;
      total.axis[0][f] -= face_flux(rho[l], rho[r], v.axis[0][f], sat);
    }
  if (g.dim == 2) {
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int f = j * nx + i;
        const int l = (j - 1) * nx + i, r = j * nx + i;
        total.axis[1][f] -= face_flux(rho[l], rho[r], v.axis[1][f], sat);
      }
  }
  return divergence(g, total);
}

double stable_dt(const Workspace& ws, const FaceField& v) {
  const Grid& g = ws.cfg.grid;
  double inv_diff = 0.0;
  for (int a = 0; a < g.dim; ++a) {
    const double h = g.spacing(a);
    inv_diff += 1.0 / (h * h);
  }
  double dt = 1.0 / (2.0 * std::max(ws.phi.max_slope(), 1e-300) * inv_diff);

  double inv_drift = 0.0;
  for (int a = 0; a < g.dim; ++a) {
    const double vmax = v.axis[a].size() ? v.axis[a].abs().maxCoeff() : 0.0;
    inv_drift += vmax / g.spacing(a);
  }
  if (inv_drift > 0.0) dt = std::min(dt, 1.0 / (ws.slope_bound * inv_drift));

  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ConfigError("cfl_dt: degenerate grid or mobility");
  return ws.cfg.cfl * dt;
}

/// Euler update; enforces the bounds exactly after checking the violation is
/// at rounding level.
Eigen::ArrayXd euler_update(const Workspace& ws, const Eigen::ArrayXd& rho, double dt,
                            const FaceField& v) {
  const double rho_max = ws.cfg.saturation.rho_max;
  Eigen::ArrayXd next = rho + dt * rate_of_change(ws, rho, v);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < next.size(); ++i) {
    if (next[i] < 0.0) worst = std::max(worst, -next[i]);
    if (next[i] > rho_max) worst = std::max(worst, next[i] - rho_max);
  }
  if (worst > 1e-12)
    throw StepRejected("bound violation " + std::to_string(worst) + " at dt " +
                       std::to_string(dt));
  for (Eigen::Index i = 0; i < next.size(); ++i)
    next[i] = std::clamp(next[i], 0.0, rho_max);
  return next;
}

struct StateStats {
  double mass, energy, dissip, lo, hi;
};

StateStats measure(const Workspace& ws, const Eigen::ArrayXd& rho) {
  const Grid& g = ws.cfg.grid;
  Eigen::ArrayXd conv;
  const bool has_w = !ws.kernel.zero();
  if (has_w) conv = ws.kernel.apply(rho);
  DensityField f{g, rho};
  StateStats st;
  st.mass = compensated_total(rho) * g.cell_volume();
  st.energy = free_energy(f, ws.cfg.energy, ws.cfg.potentials, has_w ? &conv : nullptr);
  st.dissip =
      dissipation(f, ws.cfg.energy, ws.cfg.potentials, ws.cfg.saturation,
                  has_w ? &conv : nullptr);
  st.lo = rho.minCoeff();
  st.hi = rho.maxCoeff();
  return st;
}

}  // namespace

FaceField drift_velocity(const DensityField& field, const PotentialSpec& pots) {
  Eigen::ArrayXd potential = potential_on_grid(field.grid, pots);
  if (pots.has_w()) potential += convolve(field, pots).values;
  return drift_faces(field.grid, potential);
}

Eigen::ArrayXd rhs(const DensityField& field, const SimulationConfig& config) {
  Workspace ws(config);
  const FaceField v = drift_faces(field.grid, ws.drift_potential(field.values));
  return rate_of_change(ws, field.values, v);
}

double cfl_dt(const DensityField& field, const SimulationConfig& config) {
  Workspace ws(config);
  const FaceField v = drift_faces(field.grid, ws.drift_potential(field.values));
  return stable_dt(ws, v);
}

DensityField step(const DensityField& field, double dt, const SimulationConfig& config) {
  Workspace ws(config);
  const FaceField v = drift_faces(field.grid, ws.drift_potential(field.values));
  return DensityField{field.grid, euler_update(ws, field.values, dt, v)};
}

RunResult run(const SimulationConfig& config) {
  config.validate();
  Workspace ws(config);
  const Grid& g = config.grid;

  Eigen::ArrayXd rho = config.initial.sample(g);
  RunResult result;
  result.trajectory.grid = g;
  result.trajectory.append(0.0, rho);
  {
    const StateStats st = measure(ws, rho);
    result.ledger.append(0.0, 0.0, st.mass, st.energy, st.dissip, st.lo, st.hi);
  }
  if (config.t_end == 0.0) return result;

  const bool static_drift = ws.kernel.zero();
  FaceField v = drift_faces(g, ws.drift_potential(rho));
  double dt_stable = stable_dt(ws, v);

  double t = 0.0;
  long accepted = 0;
  double last_snapshot_t = 0.0;
  const double t_eps = 1e-12 * std::max(1.0, config.t_end);

  while (t < config.t_end - t_eps) {
    if (!static_drift) {
      v = drift_faces(g, ws.drift_potential(rho));
      dt_stable = stable_dt(ws, v);
    }
    double dt = config.dt_override ? std::min(*config.dt_override, dt_stable) : dt_stable;
    dt = std::min(dt, config.t_end - t);

    int halvings = 0;
    for (;;) {
      try {
        Eigen::ArrayXd next = euler_update(ws, rho, dt, v);
        rho.swap(next);
        break;
      } catch (const StepRejected& e) {
        if (++halvings > 40)
          throw SolverAbort(std::string("persistent step rejection: ") + e.what(),
                            DensityField{g, rho}, t);
        dt *= 0.5;
      }
    }

    t += dt;
    ++accepted;
    const StateStats st = measure(ws, rho);
    result.ledger.append(t, dt, st.mass, st.energy, st.dissip, st.lo, st.hi);
    if (accepted % config.snapshot_every == 0) {
      result.trajectory.append(t, rho);
      last_snapshot_t = t;
    }
  }
  if (last_snapshot_t < t) result.trajectory.append(t, rho);
  return result;
}

double stationary_residual(const DensityField& field, const SimulationConfig& config) {
  Workspace ws(config);
  Eigen::ArrayXd conv;
  const Eigen::ArrayXd potential = ws.drift_potential(field.values, &conv);
  const FaceField v = drift_faces(field.grid, potential);
  const Eigen::ArrayXd rate = rate_of_change(ws, field.values, v);
  const double d = dissipation(field, config.energy, config.potentials,
                               config.saturation, ws.kernel.zero() ? nullptr : &conv);
  return d + rate.abs().maxCoeff();
}

}  // namespace satdiff
