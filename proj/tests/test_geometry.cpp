#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "spiraldrift/geometry.hpp"

using namespace spiraldrift;
using std::numbers::pi;

namespace {

SurfaceSpec paraboloid(double A, int sign = -1) {
  SurfaceSpec s;
  s.shape = ParaboloidShape{A, sign};
  s.L = 10.0;
  s.dx = 0.1;
  return s;
}

// Fig. 1b geometry: paraboloid with rotating fibers and d_L / d_T = 4.
SurfaceSpec fig1b(double L = 20.0, double dx = 0.2) {
  SurfaceSpec s;
  s.shape = ParaboloidShape{0.05, -1};
  s.fiber = LinearFiber{pi / 40.0};
  s.dL = 4.0;
  s.L = L;
  s.dx = dx;
  return s;
}

// g_AB = D0 J^T D^-1 J with J the embedding Jacobian of (x, y, f(x, y)).
Eigen::Matrix2d metric_oracle(double fx, double fy, double alpha, double dL, double dT, double D0) {
  Eigen::Vector3d eL(std::cos(alpha), std::sin(alpha), fx * std::cos(alpha) + fy * std::sin(alpha));
  eL.normalize();
  const Eigen::Matrix3d D = dT * Eigen::Matrix3d::Identity() + (dL - dT) * eL * eL.transpose();
  Eigen::Matrix<double, 3, 2> J;
  J << 1, 0, 0, 1, fx, fy;
  return D0 * J.transpose() * D.inverse() * J;
}

}  // namespace

TEST_CASE("induced metric equals the pulled-back inverse diffusion tensor") {
  for (double x : {-3.0, 0.0, 1.5})
    for (double y : {-2.0, 0.5, 4.0}) {
      SurfaceSpec s = fig1b();
      const auto m = induced_metric<double>(s, x, y);
      const double A = 0.05;
      const Eigen::Matrix2d ref = metric_oracle(-2 * A * x, -2 * A * y, pi / 40.0 * (x + y), 4.0, 1.0, 1.0);
      CHECK((m.lower - ref).norm() < 1e-13);
      CHECK((m.lower * m.upper - Eigen::Matrix2d::Identity()).norm() < 1e-13);
      CHECK(m.sqrt_g == doctest::Approx(std::sqrt(ref.determinant())).epsilon(1e-13));
    }
}

TEST_CASE("fiber frame is orthonormal with e_N pointing up") {
  const auto fr = fiber_frame(fig1b(), 2.0, -1.0);
  CHECK(fr.eL.norm() == doctest::Approx(1.0));
  CHECK(fr.eT.norm() == doctest::Approx(1.0));
  CHECK(fr.eN.norm() == doctest::Approx(1.0));
  CHECK(std::abs(fr.eL.dot(fr.eT)) < 1e-14);
  CHECK(std::abs(fr.eL.dot(fr.eN)) < 1e-14);
  CHECK(fr.eN(2) > 0.0);
  CHECK(fr.eL.cross(fr.eT).dot(fr.eN) == doctest::Approx(1.0));
}

TEST_CASE("diffusion tensor has eigenvalues d_L along the fiber and d_T across") {
  const auto fr = fiber_frame(fig1b(), 1.0, 2.0);
  const Mat3<double> D = diffusion_tensor_3d(fr.eL, 4.0, 1.0);
  CHECK((D * fr.eL - 4.0 * fr.eL).norm() < 1e-14);
  CHECK((D * fr.eT - fr.eT).norm() < 1e-14);
  CHECK((D * fr.eN - fr.eN).norm() < 1e-14);
}

TEST_CASE("non-finite slope is rejected") {
  Vec2<double> slope(std::nan(""), 0.0);
  CHECK_THROWS_AS(fiber_frame(slope, 0.0), std::domain_error);
}

TEST_CASE("flat isotropic plane has unit metric and zero curvature") {
  SurfaceSpec s;
  s.L = 2.0;
  const MetricField m = christoffel_and_ricci(s);
  CHECK(m.analytic);
  CHECK((m.sqrt_g - 1.0).abs().maxCoeff() < 1e-15);
  CHECK(m.ricci.abs().maxCoeff() < 1e-15);
  for (const auto& g : m.christoffel) CHECK(g.abs().maxCoeff() < 1e-15);
}

TEST_CASE("isotropic paraboloid curvature matches 8A^2 / (1 + 4A^2 r^2)^2") {
  for (double A : {0.05, 0.1, 0.5}) {
    const SurfaceSpec s = paraboloid(A);
    const MetricField m = christoffel_and_ricci(s, DerivativeMode::Analytic);
    CHECK(m.grid.nx * m.grid.ny >= 10000);
    double worst = 0.0;
    for (int j = 0; j < m.grid.ny; ++j)
      for (int i = 0; i < m.grid.nx; ++i) {
        const double r2 = m.grid.x(i) * m.grid.x(i) + m.grid.y(j) * m.grid.y(j);
        const double ref = 8.0 * A * A / std::pow(1.0 + 4.0 * A * A * r2, 2);
        worst = std::max(worst, std::abs(m.ricci(j, i) - ref) / ref);
      }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("anisotropic plane curvature matches 4 (d_L - d_T) B^2 sin 2 alpha") {
  SurfaceSpec s;
  const double B = pi / 40.0;
  s.fiber = LinearFiber{B};
  s.dL = 4.0;
  s.L = 30.0;
  s.dx = 0.3;
  const MetricField m = christoffel_and_ricci(s, DerivativeMode::Analytic);
  const double scale = 4.0 * 3.0 * B * B;
  double worst = 0.0;
  for (int j = 0; j < m.grid.ny; ++j)
    for (int i = 0; i < m.grid.nx; ++i) {
      const double ref = scale * std::sin(2.0 * B * (m.grid.x(i) + m.grid.y(j)));
      worst = std::max(worst, std::abs(m.ricci(j, i) - ref) / scale);
    }
  CHECK(worst < 1e-8);
}

TEST_CASE("curvature of the isotropic metric is twice the Gaussian curvature") {
  // Gaussian curvature of a graph: (f_xx f_yy - f_xy^2) / (1 + |grad f|^2)^2.
  const double A = 0.2;
  const SurfaceSpec s = paraboloid(A, 1);
  for (double x : {0.0, 1.0, -2.5})
    for (double y : {0.3, -1.0}) {
      const double fx = 2 * A * x, fy = 2 * A * y;
      const double K = (4 * A * A) / std::pow(1 + fx * fx + fy * fy, 2);
      CHECK(ricci_at<double>(s, x, y) == doctest::Approx(2.0 * K).epsilon(1e-12));
    }
}

TEST_CASE("curvature decomposition holds on the rotating-fiber paraboloid") {
  const SurfaceSpec s = fig1b();
  SUBCASE("analytic path") {
    const MetricField m = christoffel_and_ricci(s, DerivativeMode::Analytic);
    const RicciDecomposition d = ricci_decomposition(s, DerivativeMode::Analytic);
    const Field sum = s.dT * d.shape + (s.dL - s.dT) * d.aniso;
    const double scale = m.ricci.abs().maxCoeff();
    CHECK(((sum - m.ricci).abs() / scale).maxCoeff() < 1e-6);
  }
  SUBCASE("finite-difference path, away from the reduced-order band") {
    const SurfaceSpec fine = fig1b(20.0, 0.1);
    const MetricField m = christoffel_and_ricci(fine, DerivativeMode::FiniteDifference);
    const RicciDecomposition d = ricci_decomposition(fine, DerivativeMode::FiniteDifference);
    const Field sum = fine.dT * d.shape + (fine.dL - fine.dT) * d.aniso;
    const double scale = m.ricci.abs().maxCoeff();
    double worst = 0.0;
    for (int j = 0; j < m.grid.ny; ++j)
      for (int i = 0; i < m.grid.nx; ++i)
        if (!m.reduced_accuracy(i, j)) worst = std::max(worst, std::abs(sum(j, i) - m.ricci(j, i)) / scale);
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("finite-difference curvature agrees with the analytic path") {
  const SurfaceSpec s = fig1b(20.0, 0.1);
  const MetricField a = christoffel_and_ricci(s, DerivativeMode::Analytic);
  const MetricField f = christoffel_and_ricci(s, DerivativeMode::FiniteDifference);
  CHECK_FALSE(f.analytic);
  CHECK(f.reduced_band > 0);
  const double scale = a.ricci.abs().maxCoeff();
  double worst = 0.0;
  for (int j = 0; j < a.grid.ny; ++j)
    for (int i = 0; i < a.grid.nx; ++i)
      if (!f.reduced_accuracy(i, j)) worst = std::max(worst, std::abs(a.ricci(j, i) - f.ricci(j, i)) / scale);
  CHECK(worst < 1e-3);
  CHECK((a.sqrt_g - f.sqrt_g).abs().maxCoeff() < 1e-14);
}

TEST_CASE("tabulated shape and fiber reproduce the analytic geometry") {
  SurfaceSpec s = fig1b(20.0, 0.1);
  const GridGeometry g = s.grid();
  Field z = g.zeros(), alpha = g.zeros();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      z(j, i) = -0.05 * (g.x(i) * g.x(i) + g.y(j) * g.y(j));
      alpha(j, i) = pi / 40.0 * (g.x(i) + g.y(j));
    }
  SurfaceSpec t = s;
  t.shape = TabulatedShape{g, z};
  t.fiber = TabulatedFiber{g, alpha};
  CHECK_FALSE(t.analytic());
  CHECK_THROWS_AS(christoffel_and_ricci(t, DerivativeMode::Analytic), std::invalid_argument);
  const MetricField a = christoffel_and_ricci(s);
  const MetricField f = christoffel_and_ricci(t);
  const double scale = a.ricci.abs().maxCoeff();
  double worst = 0.0;
  for (int j = 0; j < a.grid.ny; ++j)
    for (int i = 0; i < a.grid.nx; ++i)
      if (!f.reduced_accuracy(i, j)) worst = std::max(worst, std::abs(a.ricci(j, i) - f.ricci(j, i)) / scale);
  CHECK(worst < 1e-3);
}

TEST_CASE("Christoffel symbols are symmetric and vanish for constant metrics") {
  SurfaceSpec s;
  s.fiber = ConstantFiber{0.3};
  s.dL = 4.0;
  s.L = 2.0;
  const MetricField m = christoffel_and_ricci(s);
  for (const auto& g : m.christoffel) CHECK(g.abs().maxCoeff() < 1e-15);
  CHECK(m.ricci.abs().maxCoeff() < 1e-15);
  const MetricField p = christoffel_and_ricci(fig1b());
  CHECK(&p.gamma(0, 0, 1) == &p.gamma(0, 1, 0));
  CHECK(&p.gamma(1, 0, 1) == &p.gamma(1, 1, 0));
}

TEST_CASE("surface spec validation") {
  SurfaceSpec s;
  s.dL = 0.5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SurfaceSpec{};
  s.shape = ParaboloidShape{0.1, 0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SurfaceSpec{};
  s.L = 1.05;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK(MetricField::levi_civita(0, 1) == 1.0);
  CHECK(MetricField::levi_civita(1, 0) == -1.0);
}
