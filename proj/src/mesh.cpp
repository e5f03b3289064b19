#include "satdiff/mesh.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "satdiff/errors.hpp"
#include "satdiff/numerics.hpp"

namespace satdiff {

Grid Grid::line(double a, double b, int n) {
  Grid g;
  g.dim = 1;
  g.cells = {n, 1};
  g.lo = {a, 0.0};
  g.hi = {b, 1.0};
  g.validate();
  return g;
}

Grid Grid::box(double ax, double bx, int nx, double ay, double by, int ny) {
  Grid g;
  g.dim = 2;
  g.cells = {nx, ny};
  g.lo = {ax, ay};
  g.hi = {bx, by};
  g.validate();
  return g;
}

void Grid::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("grid.dim: must be 1 or 2");
  for (int a = 0; a < dim; ++a) {
    if (cells[a] < 4) throw ConfigError("grid.cells: need at least 4 cells per axis");
    if (!(hi[a] > lo[a])) throw ConfigError("grid.extents: upper bound must exceed lower");
  }
}

bool Grid::operator==(const Grid& o) const {
  if (dim != o.dim) return false;
  for (int a = 0; a < dim; ++a)
    if (cells[a] != o.cells[a] || lo[a] != o.lo[a] || hi[a] != o.hi[a]) return false;
  return true;
}

DensityField make_field(const Grid& g, double fill) {
  DensityField f;
  f.grid = g;
  f.values = Eigen::ArrayXd::Constant(g.cell_count(), fill);
  return f;
}

FaceField make_faces(const Grid& g, double fill) {
  FaceField ff;
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  ff.axis[0] = Eigen::ArrayXd::Constant((nx + 1) * ny, fill);
  if (g.dim == 2) ff.axis[1] = Eigen::ArrayXd::Constant(nx * (ny + 1), fill);
  return ff;
}

FaceField face_gradient(const Grid& g, const Eigen::ArrayXd& v) {
  if (v.size() != g.cell_count())
    throw std::invalid_argument("face_gradient: value count does not match grid");
  FaceField ff = make_faces(g, 0.0);
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  const double hx = g.spacing(0);
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i)
      ff.axis[0][j * (nx + 1) + i] = (v[j * nx + i] - v[j * nx + i - 1]) / hx;
  if (g.dim == 2) {
    const double hy = g.spacing(1);
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        ff.axis[1][j * nx + i] = (v[j * nx + i] - v[(j - 1) * nx + i]) / hy;
  }
  return ff;
}

Eigen::ArrayXd divergence(const Grid& g, const FaceField& flux) {
  const int nx = g.cells[0];
  const int ny = g.dim == 2 ? g.cells[1] : 1;
  if (flux.axis[0].size() != (nx + 1) * ny)
    throw std::invalid_argument("divergence: axis-0 face count does not match grid");
  if (g.dim == 2 && flux.axis[1].size() != nx * (ny + 1))
    throw std::invalid_argument("divergence: axis-1 face count does not match grid");

  for (int j = 0; j < ny; ++j) {
    if (flux.axis[0][j * (nx + 1)] != 0.0 || flux.axis[0][j * (nx + 1) + nx] != 0.0)
      throw std::invalid_argument("divergence: nonzero boundary flux on axis 0");
  }
  if (g.dim == 2) {
    for (int i = 0; i < nx; ++i) {
      if (flux.axis[1][i] != 0.0 || flux.axis[1][ny * nx + i] != 0.0)
        throw std::invalid_argument("divergence: nonzero boundary flux on axis 1");
    }
  }

  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(g.cell_count());
  const double hx = g.spacing(0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      out[j * nx + i] =
          (flux.axis[0][j * (nx + 1) + i + 1] - flux.axis[0][j * (nx + 1) + i]) / hx;
  if (g.dim == 2) {
    const double hy = g.spacing(1);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        out[j * nx + i] += (flux.axis[1][(j + 1) * nx + i] - flux.axis[1][j * nx + i]) / hy;
  }
  return out;
}

static void require_shared_grid(const DensityField& a, const DensityField& b) {
  if (a.grid != b.grid) throw std::invalid_argument("fields do not share a grid");
}

double l1_distance(const DensityField& a, const DensityField& b) {
  require_shared_grid(a, b);
  CompensatedSum s;
  for (Eigen::Index i = 0; i < a.values.size(); ++i)
    s.add(std::abs(a.values[i] - b.values[i]));
  return s.value() * a.grid.cell_volume();
}

double sup_distance(const DensityField& a, const DensityField& b) {
  require_shared_grid(a, b);
  return (a.values - b.values).abs().maxCoeff();
}

void Trajectory::append(double t, Eigen::ArrayXd frame) {
  if (frame.size() != grid.cell_count())
    throw std::invalid_argument("trajectory frame size does not match grid");
  if (!times.empty() && !(t > times.back()))
    throw std::invalid_argument("trajectory times must be strictly increasing");
  times.push_back(t);
  frames.push_back(std::move(frame));
}

double snapshot_spacing(const Trajectory& traj, double rel_tol) {
  if (traj.times.size() < 2)
    throw std::invalid_argument("snapshot spacing needs at least two snapshots");
  const double mean =
      (traj.times.back() - traj.times.front()) / double(traj.times.size() - 1);
  for (std::size_t j = 1; j + 1 < traj.times.size(); ++j) {
    const double dt = traj.times[j] - traj.times[j - 1];
    if (std::abs(dt - mean) > rel_tol * mean)
      throw std::invalid_argument("trajectory snapshots are not uniformly spaced");
  }
  return mean;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_field_csv(const std::filesystem::path& path, const DensityField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const Grid& g = f.grid;
  if (g.dim == 1) {
    os << "i,x,value\n";
    for (int i = 0; i < g.cells[0]; ++i)
      os << i << ',' << format_double(g.center(0, i)) << ','
         << format_double(f.values[i]) << '\n';
  } else {
    os << "i,j,x,y,value\n";
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i)
        os << i << ',' << j << ',' << format_double(g.center(0, i)) << ','
           << format_double(g.center(1, j)) << ','
           << format_double(f.values[g.index(i, j)]) << '\n';
  }
}

DensityField read_field_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  std::getline(is, header);
  const bool two_d = header.rfind("i,j,", 0) == 0;

  std::vector<double> xs, ys, vals;
  std::vector<int> is_, js_;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> toks;
    while (std::getline(ss, tok, ',')) toks.push_back(tok);
    if (two_d) {
      if (toks.size() != 5) throw std::runtime_error("malformed field CSV row");
      is_.push_back(std::stoi(toks[0]));
      js_.push_back(std::stoi(toks[1]));
      xs.push_back(std::stod(toks[2]));
      ys.push_back(std::stod(toks[3]));
      vals.push_back(std::stod(toks[4]));
    } else {
      if (toks.size() != 3) throw std::runtime_error("malformed field CSV row");
      is_.push_back(std::stoi(toks[0]));
      xs.push_back(std::stod(toks[1]));
      vals.push_back(std::stod(toks[2]));
    }
  }
  if (vals.empty()) throw std::runtime_error("empty field CSV");

  Grid g;
  if (two_d) {
    const int nx = *std::max_element(is_.begin(), is_.end()) + 1;
    const int ny = *std::max_element(js_.begin(), js_.end()) + 1;
    // reconstruct extents from the first two distinct centers per axis
    const double hx = xs[1] - xs[0];
    const double hy = ys[std::size_t(nx)] - ys[0];
    g = Grid::box(xs[0] - 0.5 * hx, xs[0] - 0.5 * hx + nx * hx, nx,
                  ys[0] - 0.5 * hy, ys[0] - 0.5 * hy + ny * hy, ny);
  } else {
    const int n = int(vals.size());
    const double h = xs[1] - xs[0];
    g = Grid::line(xs[0] - 0.5 * h, xs[0] - 0.5 * h + n * h, n);
  }
  DensityField f = make_field(g);
  for (std::size_t r = 0; r < vals.size(); ++r) {
    const int flat = two_d ? g.index(is_[r], js_[r]) : is_[r];
    f.values[flat] = vals[r];
  }
  return f;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  nlohmann::json header;
  header["format"] = "satdiff-trajectory";
  header["version"] = 1;
  header["dim"] = traj.grid.dim;
  header["cells"] = std::vector<int>(traj.grid.cells.begin(),
                                     traj.grid.cells.begin() + traj.grid.dim);
  header["lo"] = std::vector<double>(traj.grid.lo.begin(),
                                     traj.grid.lo.begin() + traj.grid.dim);
  header["hi"] = std::vector<double>(traj.grid.hi.begin(),
                                     traj.grid.hi.begin() + traj.grid.dim);
  header["times"] = traj.times;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << header.dump() << '\n';
  for (const auto& frame : traj.frames)
    os.write(reinterpret_cast<const char*>(frame.data()),
             std::streamsize(sizeof(double)) * frame.size());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "satdiff-trajectory")
    throw std::runtime_error(path.string() + " is not a trajectory file");

  Trajectory traj;
  const int dim = header.at("dim").get<int>();
  const auto cells = header.at("cells").get<std::vector<int>>();
  const auto lo = header.at("lo").get<std::vector<double>>();
  const auto hi = header.at("hi").get<std::vector<double>>();
  traj.grid = dim == 1 ? Grid::line(lo[0], hi[0], cells[0])
                       : Grid::box(lo[0], hi[0], cells[0], lo[1], hi[1], cells[1]);
  const auto times = header.at("times").get<std::vector<double>>();

  const int count = traj.grid.cell_count();
  for (double t : times) {
    Eigen::ArrayXd frame(count);
    is.read(reinterpret_cast<char*>(frame.data()),
            std::streamsize(sizeof(double)) * count);
    if (!is) throw std::runtime_error("trajectory payload truncated: " + path.string());
    traj.append(t, std::move(frame));
  }
  return traj;
}

std::pair<std::vector<double>, std::vector<double>> read_two_column_csv(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> xs, ys;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    // tolerate a non-numeric header row
    if (!std::isdigit(static_cast<unsigned char>(line[0])) && line[0] != '-' &&
        line[0] != '+' && line[0] != '.')
      continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("malformed CSV row: " + line);
    xs.push_back(std::stod(line.substr(0, comma)));
    ys.push_back(std::stod(line.substr(comma + 1)));
  }
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1]))
      throw std::runtime_error("CSV coordinates must be strictly increasing: " +
                               path.string());
  return {std::move(xs), std::move(ys)};
}

}  // namespace satdiff
