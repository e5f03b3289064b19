#include "satdiff/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace satdiff {

double Cylinder::measure(int dim) const {
  const double ball = dim == 1 ? 2.0 * radius : M_PI * radius * radius;
  return height * ball;
}

bool Cylinder::contains_space(double x, double y, int dim) const {
  double r2 = (x - center[0]) * (x - center[0]);
  if (dim == 2) r2 += (y - center[1]) * (y - center[1]);
  return r2 < radius * radius;
}

bool Cylinder::contains_time(double t) const {
  return t > t_vertex - height && t <= t_vertex + 1e-12 * std::max(1.0, std::abs(t_vertex));
}

std::string Cylinder::describe(int dim) const {
  std::ostringstream os;
  os << "cylinder vertex (" << center[0];
  if (dim == 2) os << ", " << center[1];
  os << "; t=" << t_vertex << "), radius " << radius << ", height " << height;
  return os.str();
}

double intrinsic_theta(double omega, const SaturationSpec& spec) {
  if (!(omega > 0.0)) throw std::domain_error("intrinsic_theta: oscillation must be positive");
  if (omega > spec.rho_max + 1e-12)
    throw std::domain_error("intrinsic_theta: oscillation exceeds rho_max");
  return 1.0 / (spec.c0 * std::pow(omega / 4.0, spec.beta));
}

Cylinder intrinsic_cylinder(const std::array<double, 2>& vertex_x, double t_vertex,
                            double radius, double omega, const SaturationSpec& spec) {
  Cylinder c;
  c.center = vertex_x;
  c.t_vertex = t_vertex;
  c.radius = radius;
  c.theta = intrinsic_theta(omega, spec);
  c.height = c.theta * radius * radius;
  c.intrinsic = true;
  return c;
}

CylinderSamples collect_samples(const Trajectory& traj, const Cylinder& cyl) {
  if (!(cyl.radius > 0.0) || !(cyl.height > 0.0))
    throw std::invalid_argument("cylinder must have positive radius and height");
  const Grid& g = traj.grid;
  CylinderSamples out;
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double x = g.center(0, i);
      const double y = g.dim == 2 ? g.center(1, j) : 0.0;
      if (cyl.contains_space(x, y, g.dim)) out.cell_indices.push_back(j * nx + i);
    }

  bool any_time = false;
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    if (cyl.contains_time(traj.times[s])) {
      if (!any_time) out.first_snapshot = s;
      out.last_snapshot = s;
      any_time = true;
    }
  }
  if (out.cell_indices.empty() || !any_time)
    throw std::invalid_argument("no samples inside " + cyl.describe(g.dim));
  return out;
}

double ess_osc(const Trajectory& traj, const Cylinder& cyl) {
  const CylinderSamples s = collect_samples(traj, cyl);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = s.first_snapshot; j <= s.last_snapshot; ++j) {
    const Eigen::ArrayXd& frame = traj.frames[j];
    for (int c : s.cell_indices) {
      lo = std::min(lo, frame[c]);
      hi = std::max(hi, frame[c]);
    }
  }
  return hi - lo;
}

namespace {

void fit_decay(OscillationRecord& rec, double enclosing_radius) {
  // least squares of log omega against log r over levels with omega > 0
  std::vector<double> lx, ly;
  for (const auto& lvl : rec.levels)
    if (lvl.omega > 0.0) {
      lx.push_back(std::log(lvl.radius));
      ly.push_back(std::log(lvl.omega));
    }
  if (lx.size() < 2 || rec.initial_osc <= 0.0) {
    rec.fit_valid = false;
    return;
  }
  const double n = double(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-30) {
    rec.fit_valid = false;
    return;
  }
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  rec.alpha = slope;
  // osc <= Gamma * omega * (r/R)^alpha  =>  intercept = log(Gamma omega / R^alpha)
  rec.big_gamma =
      std::exp(intercept) * std::pow(enclosing_radius, slope) / rec.initial_osc;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double e = ly[i] - (intercept + slope * lx[i]);
    ss += e * e;
  }
  rec.residual = std::sqrt(ss / n);
  rec.fit_valid = true;
}

}  // namespace

OscillationRecord oscillation_cascade(const Trajectory& traj,
                                      const std::array<double, 2>& vertex_x,
                                      double t_vertex, double radius,
                                      const SaturationSpec& spec,
                                      const CascadeOptions& opts) {
  if (!(radius > 0.0 && radius < 1.0))
    throw std::invalid_argument("oscillation_cascade: radius must lie in (0, 1)");

  OscillationRecord rec;
  rec.epsilon = opts.epsilon;
  rec.gamma_factor = opts.gamma.value_or(1.0 - std::pow(2.0, -5.0));
  rec.eta = opts.eta.value_or(std::pow(2.0, -1.5) *
                              std::pow(rec.gamma_factor, spec.beta / 2.0));

  // oscillation over the enclosing cylinder Q(R^{2-eps}, R)
  Cylinder enclosing;
  enclosing.center = vertex_x;
  enclosing.t_vertex = t_vertex;
  enclosing.radius = radius;
  enclosing.height = std::pow(radius, 2.0 - opts.epsilon);
  rec.initial_osc = ess_osc(traj, enclosing);

  double r = radius;
  double omega_prev = rec.initial_osc;
  double height_prev = enclosing.height;
  for (int k = 1; k <= opts.max_levels; ++k, r *= rec.eta) {
    CascadeLevel lvl;
    lvl.k = k;
    lvl.radius = r;
    lvl.omega_apriori = std::pow(rec.gamma_factor, k - 1) * rec.initial_osc;

    Cylinder q;
    q.center = vertex_x;
    q.t_vertex = t_vertex;
    q.radius = r;
    if (omega_prev > 0.0) {
      lvl.theta = intrinsic_theta(omega_prev, spec);
      q.height = lvl.theta * r * r;
      q.intrinsic = true;
      q.theta = lvl.theta;
      if (q.height > height_prev) {  // keep Q_{k+1} inside Q_k
        q.height = height_prev;
        lvl.height_clamped = true;
      }
      // the intrinsic sandwich R^eps <= 1/theta <= c0 (flagged, never dropped)
      const double inv_theta = 1.0 / lvl.theta;
      if (inv_theta < std::pow(r, opts.epsilon) || inv_theta > spec.c0)
        lvl.radius_dominated = true;
    } else {
      q.height = height_prev;  // degenerate oscillation: inherit the depth
      lvl.height_clamped = true;
    }
    lvl.height = q.height;

    CylinderSamples samples;
    try {
      samples = collect_samples(traj, q);
    } catch (const std::invalid_argument&) {
      rec.truncated = true;
      break;
    }
    if (samples.count() < std::size_t(opts.min_samples)) {
      rec.truncated = true;
      break;
    }
    lvl.omega = ess_osc(traj, q);
    rec.levels.push_back(lvl);
    omega_prev = lvl.omega;
    height_prev = q.height;
  }

  fit_decay(rec, radius);
  return rec;
}

AlternativeReport alternative_classify(const Trajectory& traj, const Cylinder& cyl,
                                       double omega, double nu, double rho_max) {
  if (!(nu > 0.0 && nu < 1.0))
    throw std::invalid_argument("alternative_classify: nu must lie in (0, 1)");
  const CylinderSamples s = collect_samples(traj, cyl);

  AlternativeReport rep;
  rep.nu = nu;
  rep.level_high = rho_max - 0.5 * omega;
  rep.level_low = 0.5 * omega;
  rep.cylinder_measure = cyl.measure(traj.grid.dim);

  long high = 0, low = 0, total = 0;
  double mu_plus = -std::numeric_limits<double>::infinity();
  double mu_minus = std::numeric_limits<double>::infinity();
  for (std::size_t j = s.first_snapshot; j <= s.last_snapshot; ++j) {
    const Eigen::ArrayXd& frame = traj.frames[j];
    for (int c : s.cell_indices) {
      const double v = frame[c];
      mu_plus = std::max(mu_plus, v);
      mu_minus = std::min(mu_minus, v);
      if (v > rep.level_high) ++high;
      if (v < rep.level_low) ++low;
      ++total;
    }
  }
  rep.samples = total;
  rep.mu_plus = mu_plus;
  rep.mu_minus = mu_minus;
  rep.fraction_high = double(high) / double(total);
  rep.fraction_low = double(low) / double(total);
  rep.first = rep.fraction_high <= nu;
  return rep;
}

Trajectory steklov_average(const Trajectory& traj, double window) {
  if (traj.times.size() < 2)
    throw std::invalid_argument("steklov_average: need at least two snapshots");
  const double span = traj.times.back() - traj.times.front();
  if (!(window > 0.0) || window >= span)
    throw std::invalid_argument("steklov_average: window must lie in (0, time span)");

  Trajectory out;
  out.grid = traj.grid;
  const std::size_t n = traj.times.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double t0 = traj.times[j];
    const double t1 = t0 + window;
    if (t1 > traj.times.back() + 1e-12 * std::max(1.0, span)) break;

    // integrate the piecewise-linear-in-time interpolant over [t0, t1]
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(traj.grid.cell_count());
    std::size_t seg = j;
    double t = t0;
    while (t < t1 - 1e-15 * span && seg + 1 < n) {
      const double seg_end = std::min(traj.times[seg + 1], t1);
      const double dt_seg = seg_end - t;
      if (dt_seg > 0.0) {
        const double ta = traj.times[seg], tb = traj.times[seg + 1];
        auto frame_at = [&](double tq) -> Eigen::ArrayXd {
          const double w = (tq - ta) / (tb - ta);
          return (1.0 - w) * traj.frames[seg] + w * traj.frames[seg + 1];
        };
        acc += 0.5 * dt_seg * (frame_at(t) + frame_at(seg_end));
      }
      t = seg_end;
      if (t >= traj.times[seg + 1] - 1e-15 * span) ++seg;
    }
    out.append(t0, acc / window);
  }
  if (out.times.empty())
    throw std::invalid_argument("steklov_average: window leaves no output samples");
  return out;
}

ConvergenceReport convergence_monitor(const Trajectory& traj, double tail_fraction,
                                      double gap_tol, const SimulationConfig* config,
                                      double residual_tol) {
  if (traj.snapshots() < 10)
    throw std::invalid_argument("convergence_monitor: need at least 10 snapshots");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw std::invalid_argument("convergence_monitor: tail_fraction must lie in (0, 1]");

  ConvergenceReport rep;
  rep.rho_inf = traj.field_at(traj.snapshots() - 1);
  for (std::size_t j = 0; j < traj.snapshots(); ++j) {
    rep.times.push_back(traj.times[j]);
    rep.gaps.push_back(sup_distance(traj.field_at(j), rep.rho_inf));
  }
  rep.final_gap = rep.gaps.back();

  const std::size_t tail =
      std::max<std::size_t>(1, std::size_t(tail_fraction * double(rep.gaps.size())));
  bool tail_ok = true;
  for (std::size_t j = rep.gaps.size() - tail; j < rep.gaps.size(); ++j)
    tail_ok = tail_ok && rep.gaps[j] <= gap_tol;

  bool resid_ok = true;
  if (config != nullptr) {
    rep.residual = stationary_residual(rep.rho_inf, *config);
    resid_ok = rep.residual <= residual_tol;
  }
  rep.converged = tail_ok && resid_ok;
  return rep;
}

}  // namespace satdiff
