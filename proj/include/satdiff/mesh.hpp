#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "satdiff/errors.hpp"

namespace satdiff {

/// Uniform tensor grid on a box in R^N, N in {1,2}. Cell centers sit at
/// lo + (i + 1/2) h per axis; values are stored row-major with the x index
/// fastest: flat = iy * nx + ix.
struct Grid {
  int dim = 1;
  std::array<int, 2> cells{1, 1};
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  static Grid line(double a, double b, int n);
  static Grid box(double ax, double bx, int nx, double ay, double by, int ny);

  double spacing(int axis) const { return (hi[axis] - lo[axis]) / cells[axis]; }
  int cell_count() const { return dim == 1 ? cells[0] : cells[0] * cells[1]; }
  double cell_volume() const {
    return dim == 1 ? spacing(0) : spacing(0) * spacing(1);
  }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= hi[a] - lo[a];
    return v;
  }
  double center(int axis, int i) const { return lo[axis] + (i + 0.5) * spacing(axis); }
  int index(int ix, int iy = 0) const { return iy * cells[0] + ix; }

  void validate() const;
  bool operator==(const Grid& o) const;
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

/// Cell-averaged density on a grid.
struct DensityField {
  Grid grid;
  Eigen::ArrayXd values;
};

DensityField make_field(const Grid& g, double fill = 0.0);

/// Per-face scalars, one array per axis. Axis-0 faces are indexed
/// iy * (nx+1) + ix with ix in [0, nx]; axis-1 faces ix + nx * iy with
/// iy in [0, ny]. Boundary faces are the first/last index along the axis.
struct FaceField {
  std::array<Eigen::ArrayXd, 2> axis;
};

FaceField make_faces(const Grid& g, double fill = 0.0);

/// (f_R - f_L)/h on interior faces; boundary faces carry 0 (no-flux mirror).
FaceField face_gradient(const Grid& g, const Eigen::ArrayXd& cell_values);

/// (F_{i+1/2} - F_{i-1/2})/h per cell, summed over axes. Boundary fluxes
/// must vanish; the cell sum times h^N then telescopes to zero.
Eigen::ArrayXd divergence(const Grid& g, const FaceField& flux);

double l1_distance(const DensityField& a, const DensityField& b);
double sup_distance(const DensityField& a, const DensityField& b);

/// Time-indexed sequence of fields sharing one grid.
struct Trajectory {
  Grid grid;
  std::vector<double> times;
  std::vector<Eigen::ArrayXd> frames;

  std::size_t snapshots() const { return times.size(); }
  DensityField field_at(std::size_t j) const { return DensityField{grid, frames.at(j)}; }
  void append(double t, Eigen::ArrayXd frame);
};

/// Mean snapshot spacing; throws if the stamps are not close to uniform
/// (the final interval may be clipped by t_end, hence the loose bound).
double snapshot_spacing(const Trajectory& traj, double rel_tol = 0.05);

// -- serialization ----------------------------------------------------------

void write_field_csv(const std::filesystem::path& path, const DensityField& f);
DensityField read_field_csv(const std::filesystem::path& path);

/// One-line JSON header (grid geometry + times) followed by the raw
/// little-endian doubles of each snapshot, row-major.
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& path);

/// Two-column CSV (coordinate, value) with strictly increasing coordinates.
std::pair<std::vector<double>, std::vector<double>> read_two_column_csv(
    const std::filesystem::path& path);

std::string format_double(double v);  // shortest round-trip decimal form

}  // namespace satdiff
