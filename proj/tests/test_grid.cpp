#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "spiraldrift/grid.hpp"

using namespace spiraldrift;
namespace fs = std::filesystem;

TEST_CASE("square grid covers [-L/2, L/2] with nodes on both edges") {
  const GridGeometry g = GridGeometry::square(30.0, 0.1);
  CHECK(g.nx == 301);
  CHECK(g.ny == 301);
  CHECK(g.x0 == doctest::Approx(-15.0));
  CHECK(g.x_max() == doctest::Approx(15.0));
  CHECK_THROWS_AS(GridGeometry::square(1.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(GridGeometry::square(-1.0, 0.1), std::invalid_argument);
}

TEST_CASE("grid derivatives are exact for low-order polynomials") {
  GridGeometry g = GridGeometry::square(2.0, 0.1);
  Field f = g.zeros(), fx = g.zeros();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double x = g.x(i), y = g.y(j);
      f(j, i) = x * x * x + 2.0 * x * y;
      fx(j, i) = 3.0 * x * x + 2.0 * y;
    }
  const Field dx = diff_x(f, g.dx);
  // Fourth-order interior stencil is exact on cubics.
  for (int j = 0; j < g.ny; ++j)
    for (int i = kReducedOrderBand; i < g.nx - kReducedOrderBand; ++i) CHECK(dx(j, i) == doctest::Approx(fx(j, i)).epsilon(1e-10));
  // Second-order edge stencils are exact on quadratics.
  Field q = g.zeros();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) q(j, i) = g.y(j) * g.y(j);
  const Field dy = diff_y(q, g.dx);
  for (int j = 0; j < g.ny; ++j) CHECK(dy(j, 3) == doctest::Approx(2.0 * g.y(j)).epsilon(1e-10));
}

TEST_CASE("fourth-order interior derivative converges at fourth order") {
  auto err = [](double h) {
    const GridGeometry g = GridGeometry::square(2.0, h);
    Field f = g.zeros();
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) f(j, i) = std::sin(2.0 * g.x(i));
    const Field d = diff_x(f, h);
    double e = 0.0;
    for (int i = kReducedOrderBand; i < g.nx - kReducedOrderBand; ++i)
      e = std::max(e, std::abs(d(0, i) - 2.0 * std::cos(2.0 * g.x(i))));
    return e;
  };
  const double order = std::log2(err(0.1) / err(0.05));
  CHECK(order > 3.8);
}

TEST_CASE("grid file round trip preserves geometry and values bit for bit") {
  GridGeometry g = GridGeometry::square(1.0, 0.25);
  Field f = g.zeros();
  for (int k = 0; k < f.size(); ++k) f.data()[k] = std::sqrt(2.0) * k - 1.0 / 3.0;
  const fs::path p = fs::temp_directory_path() / "spiraldrift_grid_roundtrip.grid";
  write_grid(p, g, "ricci", f);
  const GridFile back = read_grid(p);
  CHECK(back.name == "ricci");
  CHECK(back.grid == g);
  CHECK((back.values == f).all());
  CHECK_THROWS_AS(write_grid(p, g, "bad name", f), std::invalid_argument);
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << "spiraldrift-grid 1\nname x\nnx 3\nny 3\ndx 1\nend\n";
  }
  CHECK_THROWS_AS(read_grid(p), std::runtime_error);
  fs::remove(p);
}

TEST_CASE("CSV export lists x, y, value per node") {
  GridGeometry g = GridGeometry::square(1.0, 0.5);
  Field f = g.zeros();
  f(1, 2) = 7.0;
  const fs::path p = fs::temp_directory_path() / "spiraldrift_grid.csv";
  write_grid_csv(p, g, "f", f);
  std::ifstream in(p);
  std::string line;
  int rows = 0;
  bool found = false;
  std::getline(in, line);
  while (std::getline(in, line)) {
    ++rows;
    if (line.find(",7") != std::string::npos) found = true;
  }
  CHECK(rows == 9);
  CHECK(found);
  fs::remove(p);
}
