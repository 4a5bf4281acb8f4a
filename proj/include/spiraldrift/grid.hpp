#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spiraldrift {

/// Node-centred field on the (x, y) chart. Row j holds y = y0 + j*dx,
/// column i holds x = x0 + i*dx, stored row-major.
using Field = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GridGeometry {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;

  /// Square grid covering [-L/2, L/2]^2 with nodes on both edges.
  static GridGeometry square(double L, double dx);

  double x(int i) const { return x0 + i * dx; }
  double y(int j) const { return y0 + j * dx; }
  double x_max() const { return x(nx - 1); }
  double y_max() const { return y(ny - 1); }
  bool contains(double px, double py) const {
    return px >= x0 && px <= x_max() && py >= y0 && py <= y_max();
  }
  Field zeros() const { return Field::Zero(ny, nx); }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Partial derivatives on the grid: 4th-order centred stencils in the
/// interior, 2nd-order centred one node in from the edge, and 2nd-order
/// one-sided on the edge itself.
Field diff_x(const Field& f, double dx);
Field diff_y(const Field& f, double dx);

/// Width (in nodes) of the edge band whose derivatives are lower order.
inline constexpr int kReducedOrderBand = 2;

/// Binary grid dump: a short text header followed by row-major float64
/// payload (little-endian, host order).
struct GridFile {
  GridGeometry grid;
  std::string name;
  Field values;
};

void write_grid(const std::filesystem::path& path, const GridGeometry& grid,
                const std::string& name, const Field& values);
GridFile read_grid(const std::filesystem::path& path);

/// Plot-ready export with columns x,y,value.
void write_grid_csv(const std::filesystem::path& path, const GridGeometry& grid,
                    const std::string& name, const Field& values);

}  // namespace spiraldrift
