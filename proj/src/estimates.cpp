#include "satdiff/estimates.hpp"

#include <cmath>

namespace satdiff {

Eigen::ArrayXd truncate(const Eigen::ArrayXd& rho, const Truncation& trunc) {
  if (trunc.sign != 1 && trunc.sign != -1)
    throw std::invalid_argument("truncation sign must be +1 or -1");
  return (trunc.sign * (rho - trunc.level)).max(0.0);
}

LevelSetMeasure level_set_measure(const Trajectory& traj, const Cylinder& cyl, double k,
                                  int sign) {
  const CylinderSamples s = collect_samples(traj, cyl);
  const double vol = traj.grid.cell_volume();
  const double dt = traj.snapshots() > 1 ? snapshot_spacing(traj) : 0.0;

  LevelSetMeasure out;
  CompensatedSum total;
  for (std::size_t j = s.first_snapshot; j <= s.last_snapshot; ++j) {
    const Eigen::ArrayXd& frame = traj.frames[j];
    long count = 0;
    for (int c : s.cell_indices)
      if (sign * frame[c] > sign * k) ++count;
    const double slice = double(count) * vol;
    out.slices.emplace_back(traj.times[j], slice);
    total.add(slice * dt);
  }
  out.total = total.value();
  return out;
}

double psi_log(double a, double b, double c, int sign, double s) {
  if (!(a > c) || !(c > 0.0)) throw std::domain_error("psi_log requires a > c > 0");
  if (sign != 1 && sign != -1) throw std::invalid_argument("psi_log sign must be +1 or -1");
  const double q = sign > 0 ? std::max(s - b, 0.0) : std::max(b - s, 0.0);
  if (q > a + 1e-12 * a)
    throw std::domain_error("psi_log evaluated beyond its truncation bound");
  const double denom = (a + c) - std::min(q, a);
  const double v = std::log(a / denom);
  return std::max(v, 0.0);
}

namespace {

double ramp(CutoffFunction::Profile p, double u) {
  u = std::clamp(u, 0.0, 1.0);
  if (p == CutoffFunction::Profile::linear_ramp) return u;
  return u * u * (3.0 - 2.0 * u);
}

double ramp_slope(CutoffFunction::Profile p, double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  if (p == CutoffFunction::Profile::linear_ramp) return 1.0;
  return 6.0 * u * (1.0 - u);
}

double ramp_curvature(CutoffFunction::Profile p, double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  if (p == CutoffFunction::Profile::linear_ramp) return 0.0;
  return 6.0 - 12.0 * u;
}

double ramp_max_slope(CutoffFunction::Profile p) {
  return p == CutoffFunction::Profile::linear_ramp ? 1.0 : 1.5;
}

struct RadialParts {
  double dist, u;  // u: 1 at the inner radius, 0 at the outer
};

RadialParts radial(const CutoffFunction& z, const double* x) {
  double r2 = (x[0] - z.outer.center[0]) * (x[0] - z.outer.center[0]);
  if (z.dim == 2) r2 += (x[1] - z.outer.center[1]) * (x[1] - z.outer.center[1]);
  const double d = std::sqrt(r2);
  const double w = z.outer.radius - z.inner.radius;
  return {d, (z.outer.radius - d) / w};
}

double time_part(const CutoffFunction& z, double t) {
  const double w = z.outer.height - z.inner.height;
  const double u = (t - (z.outer.t_vertex - z.outer.height)) / w;
  return ramp(z.profile, u);
}

}  // namespace

double CutoffFunction::value(const double* x, double t) const {
  const RadialParts rp = radial(*this, x);
  return ramp(profile, rp.u) * time_part(*this, t);
}

double CutoffFunction::time_derivative(const double* x, double t) const {
  const RadialParts rp = radial(*this, x);
  const double w = outer.height - inner.height;
  const double u = (t - (outer.t_vertex - outer.height)) / w;
  return ramp(profile, rp.u) * ramp_slope(profile, u) / w;
}

double CutoffFunction::grad_norm(const double* x, double t) const {
  const RadialParts rp = radial(*this, x);
  const double w = outer.radius - inner.radius;
  return ramp_slope(profile, rp.u) / w * time_part(*this, t);
}

double CutoffFunction::laplacian(const double* x, double t) const {
  const RadialParts rp = radial(*this, x);
  const double w = outer.radius - inner.radius;
  const double fp = -ramp_slope(profile, rp.u) / w;          // d zeta_sp / d dist
  const double fpp = ramp_curvature(profile, rp.u) / (w * w);
  double lap = fpp;
  if (dim == 2 && rp.dist > 1e-14) lap += fp / rp.dist;
  return lap * time_part(*this, t);
}

CutoffFunction build_cutoff(const Cylinder& outer, const Cylinder& inner,
                            CutoffFunction::Profile profile, int dim) {
  if (!(inner.radius > 0.0) || !(inner.radius < outer.radius) ||
      !(inner.height > 0.0) || !(inner.height < outer.height))
    throw std::invalid_argument("cutoff: inner cylinder must sit strictly inside the outer");
  const double dx = inner.center[0] - outer.center[0];
  const double dy = dim == 2 ? inner.center[1] - outer.center[1] : 0.0;
  if (std::abs(dx) > 1e-12 || std::abs(dy) > 1e-12 ||
      std::abs(inner.t_vertex - outer.t_vertex) > 1e-12)
    throw std::invalid_argument("cutoff: cylinders must be coaxial with a shared vertex");

  CutoffFunction z;
  z.outer = outer;
  z.inner = inner;
  z.profile = profile;
  z.dim = dim;
  const double wr = outer.radius - inner.radius;
  const double wt = outer.height - inner.height;
  z.max_grad = ramp_max_slope(profile) / wr;
  z.max_dt = ramp_max_slope(profile) / wt;
  const double curv = profile == CutoffFunction::Profile::linear_ramp ? 0.0 : 6.0 / (wr * wr);
  const double radial_term =
      dim == 2 ? ramp_max_slope(profile) / (wr * inner.radius) : 0.0;
  z.max_lap = curv + radial_term;
  return z;
}

namespace {

struct LatticeScan {
  CylinderSamples samples;
  std::vector<char> in_ball;  // per flat cell index
  double dt = 0.0;            // snapshot spacing
};

LatticeScan prepare_scan(const Trajectory& traj, const Cylinder& cyl) {
  LatticeScan scan;
  scan.samples = collect_samples(traj, cyl);
  scan.in_ball.assign(std::size_t(traj.grid.cell_count()), 0);
  for (int c : scan.samples.cell_indices) scan.in_ball[std::size_t(c)] = 1;
  scan.dt = snapshot_spacing(traj);
  if (2.0 * cyl.radius / traj.grid.spacing(0) < 4.0)
    throw std::invalid_argument("lattice too coarse across " + cyl.describe(traj.grid.dim) +
                                ": fewer than 4 cells per diameter");
  return scan;
}

void finalize(EstimateReport& rep, const CheckOptions& opts) {
  rep.slack = opts.slack;
  if (rep.rhs > 0.0)
    rep.ratio = rep.lhs / rep.rhs;
  else
    rep.ratio = rep.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  rep.pass = rep.lhs <= rep.rhs * (1.0 + opts.slack);
}

/// Face loop over pairs of in-ball neighbors; fn(left flat, right flat, axis).
template <typename Fn>
void for_ball_faces(const Grid& g, const std::vector<char>& in_ball, Fn&& fn) {
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const int l = j * nx + i;
      if (in_ball[l] && in_ball[l + 1]) fn(l, l + 1, 0);
    }
  if (g.dim == 2)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int l = j * nx + i;
        if (in_ball[l] && in_ball[l + nx]) fn(l, l + nx, 1);
      }
}

void cell_position(const Grid& g, int flat, double* x) {
  const int nx = g.cells[0];
  x[0] = g.center(0, flat % nx);
  x[1] = g.dim == 2 ? g.center(1, flat / nx) : 0.0;
}

}  // namespace

EstimateReport caccioppoli_check(const Trajectory& traj, const Cylinder& cyl, double k,
                                 int sign, const CutoffFunction& zeta,
                                 const SaturationSpec& spec, const PotentialSpec& pots,
                                 const CheckOptions& opts) {
  const Grid& g = traj.grid;
  const LatticeScan scan = prepare_scan(traj, cyl);
  const double vol = g.cell_volume();
  const double lambda = lambda_bound(g, pots);
  const double smax = sigma_max(spec);
  const double c3 = 4.0 * smax * lambda;
  const Truncation trunc{k, sign};

  double sup_term = 0.0;
  double bottom_term = 0.0;
  CompensatedSum grad_term, cutoff_grad_term, time_ramp_term, level_term;

  for (std::size_t j = scan.samples.first_snapshot; j <= scan.samples.last_snapshot; ++j) {
    const double t = traj.times[j];
    const Eigen::ArrayXd& frame = traj.frames[j];
    const Eigen::ArrayXd tr = truncate(frame, trunc);

    CompensatedSum slice_sq, slice_c1, slice_c2;
    long level_count = 0;
    for (int c : scan.samples.cell_indices) {
      double x[2];
      cell_position(g, c, x);
      const double zv = zeta.value(x, t);
      slice_sq.add(tr[c] * tr[c] * zv * zv);
      const double gz = zeta.grad_norm(x, t);
      slice_c1.add(sigma(spec, frame[c]) * tr[c] * tr[c] * gz * gz);
      slice_c2.add(tr[c] * tr[c] * zv * zeta.time_derivative(x, t));
      if (sign * frame[c] > sign * k) ++level_count;
    }
    sup_term = std::max(sup_term, slice_sq.value() * vol);
    if (j == scan.samples.first_snapshot) bottom_term = slice_sq.value() * vol;
    cutoff_grad_term.add(slice_c1.value() * vol * scan.dt);
    time_ramp_term.add(slice_c2.value() * vol * scan.dt);
    level_term.add(double(level_count) * vol * scan.dt);

    CompensatedSum slice_grad;
    for_ball_faces(g, scan.in_ball, [&](int l, int r, int axis) {
      const double h = g.spacing(axis);
      double xl[2], xr[2];
      cell_position(g, l, xl);
      cell_position(g, r, xr);
      const double xf[2] = {0.5 * (xl[0] + xr[0]), 0.5 * (xl[1] + xr[1])};
      const double zf = zeta.value(xf, t);
      const double sf = 0.5 * (sigma(spec, frame[l]) + sigma(spec, frame[r]));
      const double slope = (tr[r] - tr[l]) / h;
      slice_grad.add(sf * slope * slope * zf * zf);
    });
    grad_term.add(slice_grad.value() * vol * scan.dt);
  }

  EstimateReport rep;
  rep.name = "caccioppoli";
  rep.constant = std::max({opts.c1, opts.c2, c3});
  rep.lhs = sup_term + grad_term.value();
  rep.rhs = bottom_term + opts.c1 * cutoff_grad_term.value() +
            opts.c2 * time_ramp_term.value() + c3 * level_term.value();
  rep.terms["sup"] = sup_term;
  rep.terms["gradient"] = grad_term.value();
  rep.terms["bottom"] = bottom_term;
  rep.terms["cutoff_gradient"] = opts.c1 * cutoff_grad_term.value();
  rep.terms["time_ramp"] = opts.c2 * time_ramp_term.value();
  rep.terms["level_set"] = c3 * level_term.value();
  rep.terms["lambda"] = lambda;
  rep.terms["sigma_max"] = smax;
  finalize(rep, opts);
  return rep;
}

EstimateReport log_estimate_check(const Trajectory& traj, const Cylinder& cyl, double k,
                                  double c, int sign, const CutoffFunction& zeta,
                                  const SaturationSpec& spec, const PotentialSpec& pots,
                                  const CheckOptions& opts) {
  const Grid& g = traj.grid;
  const LatticeScan scan = prepare_scan(traj, cyl);
  const double vol = g.cell_volume();
  const Truncation trunc{k, sign};

  double trunc_sup = 0.0;
  for (std::size_t j = scan.samples.first_snapshot; j <= scan.samples.last_snapshot; ++j) {
    const Eigen::ArrayXd tr = truncate(traj.frames[j], trunc);
    for (int cidx : scan.samples.cell_indices) trunc_sup = std::max(trunc_sup, tr[cidx]);
  }

  EstimateReport rep;
  rep.name = "log-estimate";
  if (trunc_sup == 0.0) {
    // the truncation vanishes identically: both sides are zero
    rep.terms["trunc_sup"] = 0.0;
    finalize(rep, opts);
    return rep;
  }
  if (!(c > 0.0) || !(c < trunc_sup))
    throw std::domain_error("log_estimate_check: need 0 < c < sup of the truncation");

  const double lambda = lambda_bound(g, pots);
  const double smax = sigma_max(spec);
  const double log_factor = 1.0 + std::log(trunc_sup / c);
  const double level_const = 3.0 * smax * lambda * lambda / (c * c) * log_factor;

  double sup_term = 0.0, bottom_term = 0.0;
  CompensatedSum cutoff_grad_term, level_term;
  for (std::size_t j = scan.samples.first_snapshot; j <= scan.samples.last_snapshot; ++j) {
    const double t = traj.times[j];
    const Eigen::ArrayXd& frame = traj.frames[j];
    CompensatedSum slice_sq, slice_grad;
    long level_count = 0;
    for (int cidx : scan.samples.cell_indices) {
      double x[2];
      cell_position(g, cidx, x);
      const double psi = psi_log(trunc_sup, k, c, sign, frame[cidx]);
      const double zv = zeta.value(x, t);
      slice_sq.add(psi * psi * zv * zv);
      const double gz = zeta.grad_norm(x, t);
      slice_grad.add(sigma(spec, frame[cidx]) * psi * gz * gz);
      if (sign * frame[cidx] > sign * k) ++level_count;
    }
    sup_term = std::max(sup_term, slice_sq.value() * vol);
    if (j == scan.samples.first_snapshot) bottom_term = slice_sq.value() * vol;
    cutoff_grad_term.add(slice_grad.value() * vol * scan.dt);
    level_term.add(double(level_count) * vol * scan.dt);
  }

  rep.constant = level_const;
  rep.lhs = sup_term;
  rep.rhs = bottom_term + 6.0 * cutoff_grad_term.value() + level_const * level_term.value();
  rep.terms["sup"] = sup_term;
  rep.terms["bottom"] = bottom_term;
  rep.terms["cutoff_gradient"] = 6.0 * cutoff_grad_term.value();
  rep.terms["level_set"] = level_const * level_term.value();
  rep.terms["trunc_sup"] = trunc_sup;
  rep.terms["lambda"] = lambda;
  finalize(rep, opts);
  return rep;
}

EstimateReport degiorgi_check(const DensityField& field,
                              const std::array<double, 2>& center, double r, double k0,
                              double k1, const CheckOptions& opts) {
  if (!(k1 < k0)) throw std::invalid_argument("degiorgi_check: need k1 < k0");
  const Grid& g = field.grid;
  const double cn = opts.degiorgi_cn > 0.0 ? opts.degiorgi_cn : 4.0 * g.dim;

  Cylinder ball;
  ball.center = center;
  ball.radius = r;
  ball.height = 1.0;  // unused; spatial membership only
  std::vector<char> in_ball(std::size_t(g.cell_count()), 0);
  long inside = 0;
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double x = g.center(0, i);
      const double y = g.dim == 2 ? g.center(1, j) : 0.0;
      if (ball.contains_space(x, y, g.dim)) {
        in_ball[std::size_t(j * nx + i)] = 1;
        ++inside;
      }
    }
  if (inside == 0) throw std::invalid_argument("degiorgi_check: empty ball");

  const double vol = g.cell_volume();
  long above = 0, below = 0;
  for (int c = 0; c < g.cell_count(); ++c)
    if (in_ball[std::size_t(c)]) {
      if (field.values[c] > k0) ++above;
      if (field.values[c] < k1) ++below;
    }
  if (below == 0)
    throw std::invalid_argument("degiorgi_check: |v < k1| vanishes, inequality vacuous");

  // gradient mass in the band: clip to [k1, k0] so only the crossing part of
  // each face jump counts, matching the coarea restriction
  CompensatedSum band;
  for_ball_faces(g, in_ball, [&](int l, int rr, int axis) {
    const double h = g.spacing(axis);
    const double cl = std::clamp(field.values[l], k1, k0);
    const double cr = std::clamp(field.values[rr], k1, k0);
    band.add(std::abs(cr - cl) / h);
  });

  EstimateReport rep;
  rep.name = "degiorgi";
  rep.constant = cn;
  rep.lhs = (k0 - k1) * double(above) * vol;
  rep.rhs = cn * std::pow(r, g.dim + 1) / (double(below) * vol) * band.value() * vol;
  rep.terms["above_measure"] = double(above) * vol;
  rep.terms["below_measure"] = double(below) * vol;
  rep.terms["band_gradient"] = band.value() * vol;
  finalize(rep, opts);
  return rep;
}

GeometricSequence geometric_convergence(double y0, double z0, double C, double b,
                                        double kappa, double upsilon, int n_max) {
  if (!(C > 1.0) || !(b > 1.0))
    throw std::domain_error("geometric_convergence: need C > 1 and b > 1");
  if (!(kappa > 0.0) || !(upsilon > 0.0))
    throw std::domain_error("geometric_convergence: need kappa, upsilon > 0");
  if (y0 < 0.0 || z0 < 0.0)
    throw std::domain_error("geometric_convergence: sequences start nonnegative");

  GeometricSequence seq;
  const double d = std::min(kappa, upsilon);
  seq.threshold = std::pow(2.0 * C, -(1.0 + kappa) / d) *
                  std::pow(b, -(1.0 + kappa) / (d * d));
  seq.Y.push_back(y0);
  seq.Z.push_back(z0);
  double bn = 1.0;
  for (int n = 0; n < n_max; ++n, bn = std::min(bn * b, 1e280)) {
    const double y = seq.Y.back(), z = seq.Z.back();
    if (y > 1e100 || z > 1e100) break;  // diverged; stop before overflow
    if (y == 0.0 && z == 0.0) {         // exact fixed point; b^n would overflow
      seq.Y.push_back(0.0);
      seq.Z.push_back(0.0);
      continue;
    }
    const double yn = C * bn * (std::pow(y, 1.0 + upsilon) +
                                std::pow(y, upsilon) * std::pow(z, 1.0 + kappa));
    const double zn = C * bn * (y + std::pow(z, 1.0 + kappa));
    seq.Y.push_back(yn);
    seq.Z.push_back(zn);
  }
  seq.converged =
      seq.Y.size() == std::size_t(n_max) + 1 && seq.Y.back() < 1e-8 && seq.Z.back() < 1e-8;
  return seq;
}

double SpaceTimeTestFunction::value(const Grid& g, const double* x, double t) const {
  double sp = 1.0;
  if (space == Space::cosine)
    for (int a = 0; a < g.dim; ++a) {
      const double L = g.hi[a] - g.lo[a];
      sp *= std::cos(mode * M_PI * (x[a] - g.lo[a]) / L);
    }
  return sp * std::pow(1.0 - t / t_final, double(time_power));
}

double SpaceTimeTestFunction::time_derivative(const Grid& g, const double* x,
                                              double t) const {
  double sp = 1.0;
  if (space == Space::cosine)
    for (int a = 0; a < g.dim; ++a) {
      const double L = g.hi[a] - g.lo[a];
      sp *= std::cos(mode * M_PI * (x[a] - g.lo[a]) / L);
    }
  return sp * (-double(time_power) / t_final) *
         std::pow(1.0 - t / t_final, double(time_power) - 1.0);
}

double SpaceTimeTestFunction::gradient(const Grid& g, const double* x, double t,
                                       int axis) const {
  if (space == Space::constant) return 0.0;
  double sp = 1.0;
  for (int a = 0; a < g.dim; ++a) {
    const double L = g.hi[a] - g.lo[a];
    const double arg = mode * M_PI * (x[a] - g.lo[a]) / L;
    sp *= a == axis ? -std::sin(arg) * mode * M_PI / L : std::cos(arg);
  }
  return sp * std::pow(1.0 - t / t_final, double(time_power));
}

double weak_form_residual(const Trajectory& traj, const SpaceTimeTestFunction& test,
                          const SaturationSpec& spec, const PotentialSpec& pots) {
  const Grid& g = traj.grid;
  if (traj.snapshots() < 2)
    throw std::invalid_argument("weak_form_residual: need at least two snapshots");
  if (std::abs(traj.times.front()) > 1e-12)
    throw std::invalid_argument("weak_form_residual: trajectory must start at t = 0");
  if (std::abs(test.t_final - traj.times.back()) > 1e-9)
    throw std::invalid_argument("weak_form_residual: test function horizon must match the trajectory");
  {
    // contract: the test function vanishes at the final time
    double x[2] = {g.center(0, 0), g.dim == 2 ? g.center(1, 0) : 0.0};
    if (std::abs(test.value(g, x, test.t_final)) > 1e-12)
      throw std::invalid_argument("weak_form_residual: test function must vanish at t = T");
  }

  const double vol = g.cell_volume();
  const Eigen::ArrayXd vgrid = potential_on_grid(g, pots);
  const InteractionKernel kernel(g, pots);

  // trapezoid weights on the snapshot times
  std::vector<double> w(traj.snapshots(), 0.0);
  for (std::size_t j = 0; j + 1 < traj.snapshots(); ++j) {
    const double dt = traj.times[j + 1] - traj.times[j];
    w[j] += 0.5 * dt;
    w[j + 1] += 0.5 * dt;
  }

  CompensatedSum initial_term, time_term, flux_term;
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;

  for (int c = 0; c < g.cell_count(); ++c) {
    double x[2];
    cell_position(g, c, x);
    initial_term.add(traj.frames.front()[c] * test.value(g, x, 0.0) * vol);
  }

  for (std::size_t j = 0; j < traj.snapshots(); ++j) {
    const double t = traj.times[j];
    const Eigen::ArrayXd& frame = traj.frames[j];
    CompensatedSum slice_time, slice_flux;
    for (int c = 0; c < g.cell_count(); ++c) {
      double x[2];
      cell_position(g, c, x);
      slice_time.add(frame[c] * test.time_derivative(g, x, t));
    }

    Eigen::ArrayXd pot = vgrid;
    if (!kernel.zero()) pot += kernel.apply(frame);
    auto face_contribution = [&](int l, int r, int axis) {
      const double h = g.spacing(axis);
      double xl[2], xr[2];
      cell_position(g, l, xl);
      cell_position(g, r, xr);
      const double xf[2] = {0.5 * (xl[0] + xr[0]), 0.5 * (xl[1] + xr[1])};
      const double sig = 0.5 * (sigma(spec, frame[l]) + sigma(spec, frame[r]));
      const double mob = 0.5 * (frame[l] * sigma(spec, frame[l]) +
                                frame[r] * sigma(spec, frame[r]));
      const double grad_rho = (frame[r] - frame[l]) / h;
      const double grad_pot = (pot[r] - pot[l]) / h;
      slice_flux.add((sig * grad_rho + mob * grad_pot) *
                     test.gradient(g, xf, t, axis));
    };
    for (int jj = 0; jj < ny; ++jj)
      for (int ii = 0; ii + 1 < nx; ++ii) face_contribution(jj * nx + ii, jj * nx + ii + 1, 0);
    if (g.dim == 2)
      for (int jj = 0; jj + 1 < ny; ++jj)
        for (int ii = 0; ii < nx; ++ii) face_contribution(jj * nx + ii, (jj + 1) * nx + ii, 1);

    time_term.add(slice_time.value() * vol * w[j]);
    flux_term.add(slice_flux.value() * vol * w[j]);
  }

  return initial_term.value() + time_term.value() - flux_term.value();
}

}  // namespace satdiff
