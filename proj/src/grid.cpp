#include "spiraldrift/grid.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace spiraldrift {

GridGeometry GridGeometry::square(double L, double dx) {
  if (!(L > 0.0) || !(dx > 0.0)) throw std::invalid_argument("grid: L and dx must be positive");
  const double cells = L / dx;
  const long n = std::lround(cells);
  if (n < 2 || std::abs(cells - static_cast<double>(n)) > 1e-9 * cells)
    throw std::invalid_argument("grid: L/dx must be a positive integer >= 2");
  GridGeometry g;
  g.nx = g.ny = static_cast<int>(n) + 1;
  g.dx = dx;
  g.x0 = g.y0 = -0.5 * L;
  return g;
}

namespace {

// Derivative along a strided line of n samples.
template <typename Get, typename Put>
void diff_line(int n, double h, Get get, Put put) {
  if (n < 3) throw std::invalid_argument("diff: need at least 3 nodes per line");
  const double inv2h = 1.0 / (2.0 * h);
  const double inv12h = 1.0 / (12.0 * h);
  put(0, (-3.0 * get(0) + 4.0 * get(1) - get(2)) * inv2h);
  put(n - 1, (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) * inv2h);
  put(1, (get(2) - get(0)) * inv2h);
  if (n >= 4) put(n - 2, (get(n - 1) - get(n - 3)) * inv2h);
  for (int k = 2; k < n - 2; ++k)
    put(k, (get(k - 2) - 8.0 * get(k - 1) + 8.0 * get(k + 1) - get(k + 2)) * inv12h);
}

}  // namespace

Field diff_x(const Field& f, double dx) {
  Field out(f.rows(), f.cols());
  for (Eigen::Index j = 0; j < f.rows(); ++j)
    diff_line(
        static_cast<int>(f.cols()), dx, [&](int i) { return f(j, i); },
        [&](int i, double v) { out(j, i) = v; });
  return out;
}

Field diff_y(const Field& f, double dx) {
  Field out(f.rows(), f.cols());
  for (Eigen::Index i = 0; i < f.cols(); ++i)
    diff_line(
        static_cast<int>(f.rows()), dx, [&](int j) { return f(j, i); },
        [&](int j, double v) { out(j, i) = v; });
  return out;
}

void write_grid(const std::filesystem::path& path, const GridGeometry& grid,
                const std::string& name, const Field& values) {
  if (values.rows() != grid.ny || values.cols() != grid.nx)
    throw std::invalid_argument("write_grid: field shape does not match grid");
  if (name.find_first_of(" \n\t") != std::string::npos)
    throw std::invalid_argument("write_grid: field name must not contain whitespace");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_grid: cannot open " + path.string());
  out << std::setprecision(17);
  out << "spiraldrift-grid 1\n"
      << "name " << name << "\n"
      << "nx " << grid.nx << "\n"
      << "ny " << grid.ny << "\n"
      << "dx " << grid.dx << "\n"
      << "x0 " << grid.x0 << "\n"
      << "y0 " << grid.y0 << "\n"
      << "end\n";
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double) * values.size()));
  if (!out) throw std::runtime_error("write_grid: write failed for " + path.string());
}

GridFile read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_grid: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "spiraldrift-grid 1") throw std::runtime_error("read_grid: bad magic in " + path.string());
  GridFile file;
  bool have_nx = false, have_ny = false, have_dx = false;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "name") ls >> file.name;
    else if (key == "nx") { ls >> file.grid.nx; have_nx = true; }
    else if (key == "ny") { ls >> file.grid.ny; have_ny = true; }
    else if (key == "dx") { ls >> file.grid.dx; have_dx = true; }
    else if (key == "x0") ls >> file.grid.x0;
    else if (key == "y0") ls >> file.grid.y0;
    else throw std::runtime_error("read_grid: unknown header key '" + key + "'");
    if (ls.fail()) throw std::runtime_error("read_grid: malformed header line '" + line + "'");
  }
  if (line != "end" || !have_nx || !have_ny || !have_dx)
    throw std::runtime_error("read_grid: incomplete header in " + path.string());
  if (file.grid.nx <= 0 || file.grid.ny <= 0 || !(file.grid.dx > 0.0))
    throw std::runtime_error("read_grid: invalid grid dimensions");
  file.values.resize(file.grid.ny, file.grid.nx);
  in.read(reinterpret_cast<char*>(file.values.data()),
          static_cast<std::streamsize>(sizeof(double) * file.values.size()));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * file.values.size()))
    throw std::runtime_error("read_grid: truncated payload in " + path.string());
  return file;
}

void write_grid_csv(const std::filesystem::path& path, const GridGeometry& grid,
                    const std::string& name, const Field& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_grid_csv: cannot open " + path.string());
  out << std::setprecision(17) << "x,y," << name << "\n";
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) out << grid.x(i) << "," << grid.y(j) << "," << values(j, i) << "\n";
}

}  // namespace spiraldrift
