#include <random>

#include "doctest.h"
#include "satdiff/estimates.hpp"

using namespace satdiff;

namespace {

Trajectory static_trajectory(const Grid& g, const Eigen::ArrayXd& profile, int snapshots,
                             double dt) {
  Trajectory traj;
  traj.grid = g;
  for (int s = 0; s < snapshots; ++s) traj.append(s * dt, profile);
  return traj;
}

Cylinder simple_cylinder(double x0, double t0, double r, double tau) {
  Cylinder c;
  c.center = {x0, 0.0};
  c.t_vertex = t0;
  c.radius = r;
  c.height = tau;
  return c;
}

}  // namespace

TEST_CASE("truncations: directions and the splitting identity") {
  Eigen::ArrayXd rho(5);
  rho << 0.1, 0.4, 0.5, 0.8, 1.0;

  const Eigen::ArrayXd above = truncate(rho, {0.5, +1});
  CHECK(above[0] == 0.0);
  CHECK(above[3] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(truncate(rho, {2.0, +1}).abs().maxCoeff() == 0.0);

  const Eigen::ArrayXd c08 = truncate(Eigen::ArrayXd::Constant(4, 0.8), {0.5, +1});
  CHECK((c08 - 0.3).abs().maxCoeff() <= 1e-15);

  // rho = k + (rho-k)+ - (rho-k)-
  const Eigen::ArrayXd below = truncate(rho, {0.5, -1});
  for (int i = 0; i < 5; ++i)
    CHECK(rho[i] == doctest::Approx(0.5 + above[i] - below[i]).epsilon(1e-15));
}

TEST_CASE("level set measures: full, empty, half-and-half, monotone in k") {
  const Grid g = Grid::line(0.0, 1.0, 64);
  const Cylinder cyl = simple_cylinder(0.5, 0.3, 0.25, 0.25);

  const Trajectory full = static_trajectory(g, Eigen::ArrayXd::Constant(64, 1.0), 4, 0.1);
  const LevelSetMeasure m_full = level_set_measure(full, cyl, 0.5, +1);
  // every sampled cell counts: slices carry the full ball measure
  for (const auto& [t, slice] : m_full.slices)
    CHECK(slice == doctest::Approx(double((int)(0.25 / g.spacing(0)) * 2) * g.spacing(0))
                       .epsilon(0.1));
  CHECK(m_full.total > 0.0);

  const Trajectory empty = static_trajectory(g, Eigen::ArrayXd::Zero(64), 4, 0.1);
  CHECK(level_set_measure(empty, cyl, 0.5, +1).total == 0.0);

  Eigen::ArrayXd half(64);
  for (int i = 0; i < 64; ++i) half[i] = i % 2 == 0 ? 0.9 : 0.1;
  const Trajectory board = static_trajectory(g, half, 4, 0.1);
  const LevelSetMeasure m_half = level_set_measure(board, cyl, 0.5, +1);
  const LevelSetMeasure m_all = level_set_measure(board, cyl, 0.0, +1);
  CHECK(m_half.total == doctest::Approx(0.5 * m_all.total).epsilon(0.05));

  // monotone in the level
  double prev = std::numeric_limits<double>::infinity();
  for (double k : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    const double cur = level_set_measure(board, cyl, k, +1).total;
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("psi_log: branch values, upper bound, derivative bounds") {
  // worked branch value: a=1, b=1, c=1/4, sign -, s=1/4 -> log 2
  CHECK(psi_log(1.0, 1.0, 0.25, -1, 0.25) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  // flat branch
  CHECK(psi_log(1.0, 1.0, 0.25, -1, 0.9) == 0.0);
  CHECK(psi_log(1.0, 0.2, 0.25, +1, 0.1) == 0.0);
  CHECK_THROWS_AS(psi_log(0.2, 0.0, 0.25, -1, 0.1), std::domain_error);
  CHECK_THROWS_AS(psi_log(1.0, 0.0, 0.0, -1, 0.1), std::domain_error);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = 0.01 + 0.2 * unif(rng);
    const double a = c + 0.1 + unif(rng);
    const double b = 2.0 * unif(rng) - 0.5;
    const int sign = trial % 2 == 0 ? +1 : -1;
    const double bound = std::log(a / c);
    double max_val = 0.0;
    const int samples = 10000;
    std::vector<double> vals(samples + 1);
    for (int i = 0; i <= samples; ++i) {
      // sweep the admissible range (s-b)_{+-} in [0, a]
      const double q = a * double(i) / samples;
      const double s = sign > 0 ? b + q : b - q;
      vals[i] = psi_log(a, b, c, sign, s);
      max_val = std::max(max_val, vals[i]);
    }
    CHECK(max_val <= bound + 1e-12);
    // numeric |derivative| <= 1/c + O(step), and psi'' = (psi')^2 where smooth
    const double step = a / samples;
    for (int i = 1; i < samples; ++i) {
      const double d1 = std::abs(vals[i + 1] - vals[i]) / step;
      CHECK(d1 <= 1.0 / c + 1e-6 / c);
      const double qm = a * double(i) / samples;
      const bool near_kink = std::abs(qm - c) < 3 * step || qm > a - 3 * step;
      if (!near_kink && vals[i] > 0.0) {
        const double second = (vals[i + 1] - 2 * vals[i] + vals[i - 1]) / (step * step);
        const double first = (vals[i + 1] - vals[i - 1]) / (2 * step);
        if (second > 1e-6)
          CHECK(second == doctest::Approx(first * first).epsilon(0.05));
      }
    }
  }
}

TEST_CASE("cutoff functions: plateau, boundary, recorded bounds") {
  const Cylinder outer = simple_cylinder(0.5, 1.0, 0.2, 0.5);
  const Cylinder inner = simple_cylinder(0.5, 1.0, 0.1, 0.25);

  for (auto profile :
       {CutoffFunction::Profile::linear_ramp, CutoffFunction::Profile::smoothed}) {
    const CutoffFunction z = build_cutoff(outer, inner, profile, 1);

    // identically 1 on the inner cylinder
    for (double x : {0.42, 0.5, 0.59}) {
      for (double t : {0.76, 0.9, 1.0}) {
        const double xv[2] = {x, 0.0};
        CHECK(z.value(xv, t) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
    // zero on the parabolic boundary (bottom and lateral)
    for (double x : {0.3, 0.5, 0.7}) {
      const double xv[2] = {x, 0.0};
      CHECK(z.value(xv, 0.5) == 0.0);
    }
    const double lateral[2] = {0.7000000001, 0.0};
    CHECK(z.value(lateral, 0.9) == 0.0);

    // 0 <= zeta <= 1 and 0 <= dt zeta everywhere sampled
    for (double x = 0.25; x <= 0.75; x += 0.01)
      for (double t = 0.5; t <= 1.0; t += 0.02) {
        const double xv[2] = {x, 0.0};
        CHECK(z.value(xv, t) >= 0.0);
        CHECK(z.value(xv, t) <= 1.0);
        CHECK(z.time_derivative(xv, t) >= 0.0);
        CHECK(z.time_derivative(xv, t) <= z.max_dt + 1e-12);
        CHECK(z.grad_norm(xv, t) <= z.max_grad + 1e-12);
        CHECK(std::abs(z.laplacian(xv, t)) <= z.max_lap + 1e-12);
      }
  }

  // linear ramp between r/2 and r has slope 2/r
  const CutoffFunction lin =
      build_cutoff(outer, inner, CutoffFunction::Profile::linear_ramp, 1);
  CHECK(lin.max_grad == doctest::Approx(1.0 / (outer.radius - inner.radius)));
  const double mid[2] = {0.5 + 0.15, 0.0};
  CHECK(lin.grad_norm(mid, 1.0) == doctest::Approx(1.0 / 0.1).epsilon(1e-12));

  CHECK_THROWS_AS(build_cutoff(inner, outer, CutoffFunction::Profile::linear_ramp, 1),
                  std::invalid_argument);
}

TEST_CASE("cutoff bounds match the dyadic construction targets") {
  // shrinking pair Q_{n+1} subset Q_n: gap R/2^{n+2} gives |grad| <= 2^{n+2}/R
  const double R = 0.3, theta = 5.0;
  for (int n = 0; n < 3; ++n) {
    const double rn = R / 2 + R / std::pow(2.0, n + 1);
    const double rn1 = R / 2 + R / std::pow(2.0, n + 2);
    const Cylinder outer = simple_cylinder(0.5, 2.0, rn, theta * rn * rn);
    const Cylinder inner = simple_cylinder(0.5, 2.0, rn1, theta * rn1 * rn1);
    const CutoffFunction z =
        build_cutoff(outer, inner, CutoffFunction::Profile::linear_ramp, 1);
    CHECK(z.max_grad <= std::pow(2.0, n + 2) / R + 1e-12);
    CHECK(z.max_dt <= std::pow(2.0, 2 * (n + 2)) / (theta * R * R) + 1e-12);
  }
}

TEST_CASE("degiorgi check: constants below k1, empty upper set, linear ramp") {
  const Grid g = Grid::line(0.0, 1.0, 200);

  DensityField low = make_field(g, 0.2);
  EstimateReport rep = degiorgi_check(low, {0.5, 0.0}, 0.3, 0.6, 0.4);
  CHECK(rep.lhs == 0.0);
  CHECK(rep.pass);

  DensityField ramp = make_field(g);
  for (int i = 0; i < g.cell_count(); ++i) ramp.values[i] = g.center(0, i);
  rep = degiorgi_check(ramp, {0.5, 0.0}, 0.3, 0.55, 0.45);
  CHECK(rep.pass);
  // oracle: both sides by plain loops
  {
    double above = 0.0, below = 0.0, band = 0.0;
    const double h = g.spacing(0);
    for (int i = 0; i < g.cell_count(); ++i) {
      const double x = g.center(0, i);
      if (std::abs(x - 0.5) >= 0.3) continue;
      if (ramp.values[i] > 0.55) above += h;
      if (ramp.values[i] < 0.45) below += h;
    }
    for (int i = 0; i + 1 < g.cell_count(); ++i) {
      const double xl = g.center(0, i), xr = g.center(0, i + 1);
      if (std::abs(xl - 0.5) >= 0.3 || std::abs(xr - 0.5) >= 0.3) continue;
      const double cl = std::clamp(ramp.values[i], 0.45, 0.55);
      const double cr = std::clamp(ramp.values[i + 1], 0.45, 0.55);
      band += std::abs(cr - cl) / h * h;
    }
    CHECK(rep.lhs == doctest::Approx(0.1 * above).epsilon(1e-12));
    CHECK(rep.rhs == doctest::Approx(4.0 * std::pow(0.3, 2) / below * band).epsilon(1e-12));
  }

  // vacuous when nothing sits below k1
  DensityField high = make_field(g, 0.9);
  CHECK_THROWS_AS(degiorgi_check(high, {0.5, 0.0}, 0.3, 0.95, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(degiorgi_check(ramp, {0.5, 0.0}, 0.3, 0.4, 0.6), std::invalid_argument);
}

TEST_CASE("fast geometric convergence: fixed point, worked threshold, divergence") {
  const GeometricSequence zero = geometric_convergence(0.0, 0.0, 2.0, 2.0, 1.0, 1.0, 50);
  CHECK(zero.converged);
  CHECK(zero.Y.back() == 0.0);

  // C=2, b=2, kappa=upsilon=1: threshold (2C)^{-2} b^{-2} = 1/64
  const GeometricSequence seq =
      geometric_convergence(1.0 / 256, 1.0 / 256, 2.0, 2.0, 1.0, 1.0, 200);
  CHECK(seq.threshold == doctest::Approx(1.0 / 64.0).epsilon(1e-14));
  CHECK(seq.converged);

  // far above the threshold with a bigger base: the series blows up
  const GeometricSequence diverging =
      geometric_convergence(0.5, 0.5, 2.0, 4.0, 1.0, 1.0, 200);
  CHECK(!diverging.converged);
  CHECK((diverging.Y.back() > 1.0 || diverging.Z.back() > 1.0));

  CHECK_THROWS_AS(geometric_convergence(0.1, 0.1, 0.5, 2.0, 1.0, 1.0, 10),
                  std::domain_error);
}

TEST_CASE("below-threshold starts always converge (100 deterministic draws)") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int converged = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double C = 1.1 + 3.9 * unif(rng);
    const double b = 1.1 + 3.9 * unif(rng);
    const double kappa = 0.2 + 2.8 * unif(rng);
    const double upsilon = 0.2 + 2.8 * unif(rng);
    const double d = std::min(kappa, upsilon);
    const double thr = std::pow(2.0 * C, -(1.0 + kappa) / d) *
                       std::pow(b, -(1.0 + kappa) / (d * d));
    const double budget = thr * unif(rng);
    const double split = unif(rng);
    const double y0 = budget * split;
    const double z0 = std::pow(budget * (1.0 - split), 1.0 / (1.0 + kappa));
    const GeometricSequence seq =
        geometric_convergence(y0, z0, C, b, kappa, upsilon, 4000);
    if (seq.converged) ++converged;
  }
  CHECK(converged == 100);
}

TEST_CASE("caccioppoli check: vanishing truncation and constant trajectories") {
  const Grid g = Grid::line(0.0, 1.0, 64);
  const auto spec = SaturationSpec::power(2.0);
  const Cylinder cyl = simple_cylinder(0.5, 1.0, 0.2, 0.5);
  const Cylinder inner = simple_cylinder(0.5, 1.0, 0.1, 0.25);
  const CutoffFunction zeta =
      build_cutoff(cyl, inner, CutoffFunction::Profile::linear_ramp, 1);

  const Trajectory flat =
      static_trajectory(g, Eigen::ArrayXd::Constant(64, 0.6), 21, 0.05);

  // k above everything: all truncations vanish
  EstimateReport rep =
      caccioppoli_check(flat, cyl, 1.0, +1, zeta, spec, PotentialSpec::none());
  CHECK(rep.lhs == 0.0);
  CHECK(rep.pass);

  // constant state, k below: gradient terms vanish, time-ramp term covers
  rep = caccioppoli_check(flat, cyl, 0.25, +1, zeta, spec, PotentialSpec::none());
  CHECK(rep.terms.at("gradient") == 0.0);
  CHECK(rep.pass);
}

TEST_CASE("log estimate check: vanishing truncation and domain guard") {
  const Grid g = Grid::line(0.0, 1.0, 64);
  const auto spec = SaturationSpec::power(2.0);
  const Cylinder cyl = simple_cylinder(0.5, 1.0, 0.2, 0.5);
  const Cylinder inner = simple_cylinder(0.5, 1.0, 0.1, 0.25);
  const CutoffFunction zeta =
      build_cutoff(cyl, inner, CutoffFunction::Profile::linear_ramp, 1);

  const Trajectory flat =
      static_trajectory(g, Eigen::ArrayXd::Constant(64, 0.6), 21, 0.05);

  // (rho - k)_- vanishes for k below the constant
  EstimateReport rep =
      log_estimate_check(flat, cyl, 0.5, 0.1, -1, zeta, spec, PotentialSpec::none());
  CHECK(rep.lhs == 0.0);
  CHECK(rep.rhs == 0.0);
  CHECK(rep.pass);

  // c >= H is rejected
  CHECK_THROWS_AS(
      log_estimate_check(flat, cyl, 0.7, 0.5, -1, zeta, spec, PotentialSpec::none()),
      std::domain_error);
}

TEST_CASE("weak form residual: trivial test functions") {
  const Grid g = Grid::line(0.0, 1.0, 32);
  const auto spec = SaturationSpec::power(2.0);

  // piecewise-constant-in-time trajectory of a constant state
  Trajectory traj;
  traj.grid = g;
  for (int s = 0; s <= 10; ++s)
    traj.append(0.05 * s, Eigen::ArrayXd::Constant(32, 0.5));

  SpaceTimeTestFunction phi;
  phi.space = SpaceTimeTestFunction::Space::constant;
  phi.time_power = 1;
  phi.t_final = 0.5;
  // rho constant in time, phi linear in time: the time quadrature is exact
  // and the residual collapses to mass * (phi(0) - phi(0)) = 0
  const double r = weak_form_residual(traj, phi, spec, PotentialSpec::none());
  CHECK(std::abs(r) <= 1e-13);

  SpaceTimeTestFunction bad = phi;
  bad.t_final = 0.4;
  CHECK_THROWS_AS(weak_form_residual(traj, bad, spec, PotentialSpec::none()),
                  std::invalid_argument);
}
