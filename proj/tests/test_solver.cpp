#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "spiraldrift/geometry.hpp"
#include "spiraldrift/solver.hpp"

using namespace spiraldrift;
using std::numbers::pi;

namespace {

SurfaceSpec flat(double L = 4.0, double dx = 0.1) {
  SurfaceSpec s;
  s.L = L;
  s.dx = dx;
  return s;
}

SurfaceSpec fig1b(double L = 8.0, double dx = 0.1) {
  SurfaceSpec s;
  s.shape = ParaboloidShape{0.05, -1};
  s.fiber = LinearFiber{pi / 40.0};
  s.dL = 4.0;
  s.L = L;
  s.dx = dx;
  return s;
}

StencilTable stencil_for(const SurfaceSpec& s) { return build_stencil(s, christoffel_and_ricci(s)); }

double row_sum(const StencilTable& t, int i, int j) {
  double acc = 0.0;
  for (const auto& c : t.C) acc += c(j, i);
  return acc;
}

BarkleyKinetics diffusion_only(double Dv = 1.0) {
  BarkleyKinetics k;
  k.reaction = false;
  k.Dv = Dv;
  return k;
}

}  // namespace

TEST_CASE("flat isotropic stencil is the five-point Laplacian") {
  const StencilTable t = stencil_for(flat());
  for (int j = 1; j < t.grid.ny - 1; j += 7)
    for (int i = 1; i < t.grid.nx - 1; i += 5) {
      CHECK(t.coeff(0, 0)(j, i) == -4.0);
      CHECK(t.coeff(1, 0)(j, i) == 1.0);
      CHECK(t.coeff(-1, 0)(j, i) == 1.0);
      CHECK(t.coeff(0, 1)(j, i) == 1.0);
      CHECK(t.coeff(0, -1)(j, i) == 1.0);
      for (int m : {-1, 1})
        for (int n : {-1, 1}) CHECK(t.coeff(m, n)(j, i) == 0.0);
    }
  CHECK((t.inv_sqrt_g == 1.0).all());
}

TEST_CASE("constant anisotropy along x gives the substituted coefficients") {
  SurfaceSpec s = flat();
  s.dL = 4.0;  // g^AB = diag(4, 1), sqrt g = 1/2
  const StencilTable t = stencil_for(s);
  const int i = t.grid.nx / 2, j = t.grid.ny / 2;
  CHECK(t.coeff(1, 0)(j, i) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(t.coeff(-1, 0)(j, i) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(t.coeff(0, 1)(j, i) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.coeff(0, -1)(j, i) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.coeff(0, 0)(j, i) == doctest::Approx(-5.0).epsilon(1e-14));
  for (int m : {-1, 1})
    for (int n : {-1, 1}) CHECK(std::abs(t.coeff(m, n)(j, i)) < 1e-15);
  CHECK(t.inv_sqrt_g(j, i) == doctest::Approx(2.0));
}

TEST_CASE("stencil rows sum to zero on curved anisotropic metrics") {
  for (const SurfaceSpec& s : {fig1b(), [] {
         SurfaceSpec p = fig1b();
         p.shape = ParaboloidShape{0.5, 1};
         return p;
       }()}) {
    const StencilTable t = stencil_for(s);
    double worst = 0.0;
    for (int j = 0; j < t.grid.ny; ++j)
      for (int i = 0; i < t.grid.nx; ++i) worst = std::max(worst, std::abs(row_sum(t, i, j)));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("averaged half-node metric keeps zero row sums") {
  SurfaceSpec s = fig1b();
  const GridGeometry g = s.grid();
  Field z = g.zeros();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) z(j, i) = -0.05 * (g.x(i) * g.x(i) + g.y(j) * g.y(j));
  s.shape = TabulatedShape{g, z};
  const StencilTable t = stencil_for(s);
  double worst = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) worst = std::max(worst, std::abs(row_sum(t, i, j)));
  CHECK(worst < 1e-12);
}

TEST_CASE("time step bound") {
  SurfaceSpec s = flat();
  s.dL = 4.0;
  CHECK(max_time_step(s) == doctest::Approx(0.9 * 0.01 / 16.0));
  CHECK_THROWS_AS(Simulator(stencil_for(s), BarkleyKinetics{}, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Simulator(stencil_for(s), BarkleyKinetics{}, 1.0, -1e-3), std::invalid_argument);
}

TEST_CASE("rest and excited fixed points are stationary") {
  const SurfaceSpec s = fig1b(4.0);
  const StencilTable t = stencil_for(s);
  BarkleyKinetics k;
  for (double c : {0.0, 1.0}) {
    SpiralState st = SpiralState::rest(t.grid);
    st.u.setConstant(c);
    st.v.setConstant(c);
    Simulator sim(t, k, 1.0, max_time_step(s));
    sim.load(st);
    sim.advance(50);
    const SpiralState out = sim.state();
    CHECK((out.u - c).abs().maxCoeff() < 1e-13);
    CHECK((out.v - c).abs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("diffusion without kinetics conserves the integral of sqrt(g) u") {
  for (const SurfaceSpec& s : {fig1b(6.0), [] {
         SurfaceSpec p = fig1b(6.0);
         p.shape = ParaboloidShape{0.5, -1};
         return p;
       }()}) {
    const MetricField m = christoffel_and_ricci(s);
    const StencilTable t = build_stencil(s, m);
    SpiralState st = SpiralState::rest(t.grid);
    for (int j = 0; j < t.grid.ny; ++j)
      for (int i = 0; i < t.grid.nx; ++i) {
        const double x = t.grid.x(i), y = t.grid.y(j);
        st.u(j, i) = std::exp(-(x - 1.0) * (x - 1.0) - y * y) + (x > 2.0 ? 0.5 : 0.0);
      }
    auto total = [&](const Field& u) { return (m.sqrt_g * u).sum() * s.dx * s.dx; };
    const double before = total(st.u);
    Simulator sim(t, diffusion_only(), s.D0, max_time_step(s));
    sim.load(st);
    sim.advance(10000);
    CHECK(std::abs(total(sim.state().u) - before) / before < 1e-10);
  }
}

TEST_CASE("flat isotropic update matches a reference five-point implementation bit for bit") {
  const SurfaceSpec s = flat(6.0, 0.1);
  const StencilTable t = stencil_for(s);
  BarkleyKinetics k;
  k.a = 1.1;
  SpiralState st = cross_field_state(t.grid, k, 1);
  const double dt = max_time_step(s);
  const int steps = 12;
  Simulator sim(t, k, 1.0, dt);
  sim.load(st);
  sim.advance(steps);
  const SpiralState got = sim.state();

  Field u = st.u, v = st.v;
  const double inv_dx2 = 1.0 / (s.dx * s.dx);
  const double a_inv = 1.0 / k.a, eps_inv = 1.0 / k.eps;
  const int nx = t.grid.nx, ny = t.grid.ny;
  for (int n = 0; n < steps; ++n) {
    Field un = u, vn = v;
    for (int j = n + 1; j < ny - n - 1; ++j)
      for (int i = n + 1; i < nx - n - 1; ++i) {
        auto lap = [&](const Field& w) {
          return ((((w(j, i - 1) + w(j - 1, i)) + -4.0 * w(j, i)) + w(j + 1, i)) + w(j, i + 1)) * 1.0 * inv_dx2;
        };
        const double uu = u(j, i), vv = v(j, i);
        const double fu = eps_inv * uu * (1.0 - uu) * (uu - (vv + k.b) * a_inv);
        un(j, i) = uu + dt * (k.Du * lap(u) + fu);
        vn(j, i) = vv + dt * (k.Dv * lap(v) + (uu - vv));
      }
    u = un;
    v = vn;
  }
  bool identical = true;
  for (int j = steps + 1; j < ny - steps - 1; ++j)
    for (int i = steps + 1; i < nx - steps - 1; ++i)
      identical = identical && got.u(j, i) == u(j, i) && got.v(j, i) == v(j, i);
  CHECK(identical);
}

TEST_CASE("diffusion converges at second order in dx") {
  // Smooth, compactly concentrated initial condition on a curved anisotropic
  // surface; errors against a fine-grid reference at common nodes. The
  // domain is wide enough that the solution stays negligible at the edge:
  // the zero-flux wall sits half a cell outside the edge nodes, so a
  // boundary-driven error would only be first order.
  auto run = [](double dx, double dt) {
    SurfaceSpec s = fig1b(8.0, dx);
    s.shape = ParaboloidShape{0.2, -1};
    const StencilTable t = stencil_for(s);
    SpiralState st = SpiralState::rest(t.grid);
    for (int j = 0; j < t.grid.ny; ++j)
      for (int i = 0; i < t.grid.nx; ++i) {
        const double x = t.grid.x(i), y = t.grid.y(j);
        st.u(j, i) = std::exp(-4.0 * (x * x + 0.5 * y * y));
      }
    Simulator sim(t, diffusion_only(0.0), 1.0, dt);
    sim.load(st);
    sim.advance(std::lround(0.1 / dt));
    return sim.state();
  };
  const double dt = max_time_step(fig1b(4.0, 0.025)) / 2.0;
  const SpiralState ref = run(0.025, dt);
  auto error = [&](double dx) {
    const SpiralState c = run(dx, dt);
    const int r = static_cast<int>(std::lround(dx / 0.025));
    double e = 0.0;
    for (int j = 0; j < c.grid.ny; ++j)
      for (int i = 0; i < c.grid.nx; ++i) e = std::max(e, std::abs(c.u(j, i) - ref.u(j * r, i * r)));
    return e;
  };
  const double e1 = error(0.2), e2 = error(0.1);
  MESSAGE("errors " << e1 << " " << e2);
  CHECK(std::log2(e1 / e2) > 1.8);
}

TEST_CASE("stencil approximates the Laplace-Beltrami operator on curved anisotropic surfaces") {
  // Oracle: (1/sqrt g) d_A(h^AB d_B w) with h^AB from the pointwise metric
  // and the outer derivative by central differences.
  auto w = [](double x, double y) { return std::sin(0.7 * x + 0.3) * std::cos(0.5 * y) + 0.1 * x * y; };
  auto grad_w = [](double x, double y) {
    return Eigen::Vector2d(0.7 * std::cos(0.7 * x + 0.3) * std::cos(0.5 * y) + 0.1 * y,
                           -0.5 * std::sin(0.7 * x + 0.3) * std::sin(0.5 * y) + 0.1 * x);
  };
  for (const double A : {0.05, 0.5}) {
    CAPTURE(A);
    auto max_error = [&](double dx) {
      SurfaceSpec s = fig1b(4.0, dx);
      s.shape = ParaboloidShape{A, -1};
      auto flux = [&](double x, double y) {
        const MetricPoint<double> m = induced_metric(s, x, y);
        return Eigen::Vector2d(m.sqrt_g * (m.upper * grad_w(x, y)));
      };
      const StencilTable t = stencil_for(s);
      Field f = t.grid.zeros();
      for (int j = 0; j < t.grid.ny; ++j)
        for (int i = 0; i < t.grid.nx; ++i) f(j, i) = w(t.grid.x(i), t.grid.y(j));
      const Field lap = Simulator(t, diffusion_only(), 1.0, max_time_step(s)).laplacian(f);
      const double e = 1e-4;
      double worst = 0.0;
      for (int j = 2; j < t.grid.ny - 2; ++j)
        for (int i = 2; i < t.grid.nx - 2; ++i) {
          const double x = t.grid.x(i), y = t.grid.y(j);
          const double div =
              (flux(x + e, y)(0) - flux(x - e, y)(0) + flux(x, y + e)(1) - flux(x, y - e)(1)) / (2.0 * e);
          worst = std::max(worst, std::abs(lap(j, i) - div / induced_metric(s, x, y).sqrt_g));
        }
      return worst;
    };
    const double e1 = max_error(0.1), e2 = max_error(0.05);
    MESSAGE("A = " << A << ": errors " << e1 << " " << e2);
    CHECK(e2 < 0.02);
    CHECK(std::log2(e1 / e2) > 1.8);
  }
}

TEST_CASE("results do not depend on the worker count") {
  const SurfaceSpec s = fig1b(6.0);
  const StencilTable t = stencil_for(s);
  BarkleyKinetics k;
  k.a = 1.1;
  k.Dv = 0.0;
  const SpiralState st = cross_field_state(t.grid, k, 1);
  auto run = [&](int threads, long steps) {
    Simulator sim(t, k, 1.0, max_time_step(s), threads);
    sim.load(st);
    sim.advance(steps);
    return sim.state();
  };
  for (long steps : {1L, 2L, 7L}) {
    const SpiralState a = run(1, steps), b = run(3, steps);
    CHECK((a.u == b.u).all());
    CHECK((a.v == b.v).all());
  }
  // Chunked advancing equals one long advance.
  Simulator sim(t, k, 1.0, max_time_step(s));
  sim.load(st);
  sim.advance(3);
  sim.advance(4);
  CHECK((sim.state().u == run(1, 7).u).all());
  CHECK(sim.step_count() == 7);
  CHECK(sim.time() == doctest::Approx(7 * max_time_step(s)));
}

TEST_CASE("step() agrees with the simulator") {
  const SurfaceSpec s = fig1b(4.0);
  const StencilTable t = stencil_for(s);
  BarkleyKinetics k;
  const SpiralState st = cross_field_state(t.grid, k, -1);
  const SpiralState once = step(st, t, k, max_time_step(s));
  Simulator sim(t, k, 1.0, max_time_step(s));
  sim.load(st);
  sim.advance(1);
  CHECK((once.u == sim.state().u).all());
}

TEST_CASE("the discrete Laplacian of a quadratic is exact on a flat grid") {
  const SurfaceSpec s = flat(2.0, 0.1);
  const StencilTable t = stencil_for(s);
  Simulator sim(t, BarkleyKinetics{}, 1.0, max_time_step(s));
  Field w = t.grid.zeros();
  for (int j = 0; j < t.grid.ny; ++j)
    for (int i = 0; i < t.grid.nx; ++i) w(j, i) = t.grid.x(i) * t.grid.x(i) + 3.0 * t.grid.y(j) * t.grid.y(j);
  const Field lap = sim.laplacian(w);
  for (int j = 1; j < t.grid.ny - 1; ++j)
    for (int i = 1; i < t.grid.nx - 1; ++i) CHECK(lap(j, i) == doctest::Approx(8.0).epsilon(1e-9));
}

TEST_CASE("non-finite values abort with the cell and time") {
  const SurfaceSpec s = flat(2.0, 0.1);
  const StencilTable t = stencil_for(s);
  SpiralState st = SpiralState::rest(t.grid);
  st.u(4, 7) = std::numeric_limits<double>::quiet_NaN();
  Simulator sim(t, BarkleyKinetics{}, 1.0, max_time_step(s));
  sim.load(st);
  try {
    sim.advance(3);
    FAIL("expected NonFiniteStateError");
  } catch (const NonFiniteStateError& e) {
    CHECK(e.t > 0.0);
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("state grid must match the stencil") {
  const StencilTable t = stencil_for(flat(2.0, 0.1));
  Simulator sim(t, BarkleyKinetics{}, 1.0, 1e-4);
  CHECK_THROWS_AS(sim.load(SpiralState::rest(GridGeometry::square(3.0, 0.1))), std::invalid_argument);
  BarkleyKinetics bad;
  bad.eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
