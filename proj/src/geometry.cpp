#include "spiraldrift/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace spiraldrift {

namespace {

bool tabulated_shape(const SurfaceSpec& s) { return std::holds_alternative<TabulatedShape>(s.shape); }
bool tabulated_fiber(const SurfaceSpec& s) { return std::holds_alternative<TabulatedFiber>(s.fiber); }

void check_samples(const GridGeometry& expected, const GridGeometry& got, const Field& f, const char* what) {
  if (!(got == expected) || f.rows() != expected.ny || f.cols() != expected.nx)
    throw std::invalid_argument(std::string(what) + ": tabulated samples do not match the simulation grid");
  if (!f.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite tabulated samples");
}

// Slope and fiber angle at every node; tabulated inputs are differentiated
// on the grid, closed-form inputs are evaluated directly.
struct NodeInputs {
  Field fx, fy, alpha;
};

NodeInputs node_inputs(const SurfaceSpec& spec, const GridGeometry& grid) {
  NodeInputs in{grid.zeros(), grid.zeros(), grid.zeros()};
  if (const auto* tab = std::get_if<TabulatedShape>(&spec.shape)) {
    in.fx = diff_x(tab->z, grid.dx);
    in.fy = diff_y(tab->z, grid.dx);
  } else {
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        const Vec2<double> s = shape_gradient(spec.shape, grid.x(i), grid.y(j));
        in.fx(j, i) = s(0);
        in.fy(j, i) = s(1);
      }
  }
  if (const auto* tab = std::get_if<TabulatedFiber>(&spec.fiber)) {
    in.alpha = tab->alpha;
  } else {
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) in.alpha(j, i) = fiber_angle(spec.fiber, grid.x(i), grid.y(j));
  }
  return in;
}

bool use_analytic(const SurfaceSpec& spec, DerivativeMode mode) {
  switch (mode) {
    case DerivativeMode::Analytic:
      if (!spec.analytic()) throw std::invalid_argument("analytic derivatives requested for tabulated input");
      return true;
    case DerivativeMode::FiniteDifference:
      return false;
    case DerivativeMode::Auto:
      break;
  }
  return spec.analytic();
}

void allocate(MetricField& m) {
  for (auto& f : m.lower) f = m.grid.zeros();
  for (auto& f : m.upper) f = m.grid.zeros();
  for (auto& f : m.christoffel) f = m.grid.zeros();
  m.sqrt_g = m.grid.zeros();
  m.ricci = m.grid.zeros();
}

void store_metric(MetricField& m, int i, int j, const Mat2<double>& lower, const Mat2<double>& upper, double sqrt_g) {
  m.lower[0](j, i) = lower(0, 0);
  m.lower[1](j, i) = lower(0, 1);
  m.lower[2](j, i) = lower(1, 1);
  m.upper[0](j, i) = upper(0, 0);
  m.upper[1](j, i) = upper(0, 1);
  m.upper[2](j, i) = upper(1, 1);
  m.sqrt_g(j, i) = sqrt_g;
}

void store_christoffel(MetricField& m, int i, int j, const Christoffel<double>& G) {
  for (int A = 0; A < 2; ++A) {
    m.christoffel[3 * A + 0](j, i) = G[A][0][0];
    m.christoffel[3 * A + 1](j, i) = G[A][0][1];
    m.christoffel[3 * A + 2](j, i) = G[A][1][1];
  }
}

MetricField analytic_metric_field(const SurfaceSpec& spec) {
  using D1 = Dual<double>;
  using D2 = Dual<D1>;
  MetricField m;
  m.grid = spec.grid();
  m.analytic = true;
  m.reduced_band = 0;
  allocate(m);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < m.grid.ny; ++j)
    for (int i = 0; i < m.grid.nx; ++i) {
      const auto c = lift<D2>(m.grid.x(i), m.grid.y(j));
      const MetricPoint<D2> mp = induced_metric(spec, c.x, c.y);
      Mat2<double> lower;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) lower(a, b) = mp.lower(a, b).v.v;
      const Mat2<double> upper = inverse2(lower);
      store_metric(m, i, j, lower, upper, std::sqrt(lower.determinant()));
      const Christoffel<D1> Gd = christoffel_from_metric<double>(mp.lower);
      Christoffel<double> G;
      std::array<Christoffel<double>, 2> dG;
      for (int A = 0; A < 2; ++A)
        for (int B = 0; B < 2; ++B)
          for (int C = 0; C < 2; ++C) {
            G[A][B][C] = Gd[A][B][C].v;
            dG[0][A][B][C] = Gd[A][B][C].d[0];
            dG[1][A][B][C] = Gd[A][B][C].d[1];
          }
      store_christoffel(m, i, j, G);
      m.ricci(j, i) = ricci_from_christoffel<double>(upper, G, dG);
    }
  return m;
}

MetricField fd_metric_field(const SurfaceSpec& spec) {
  MetricField m;
  m.grid = spec.grid();
  m.analytic = false;
  // Two nested grid derivatives (metric -> Gamma -> R).
  m.reduced_band = 2 * kReducedOrderBand;
  allocate(m);
  const GridGeometry& grid = m.grid;
  const NodeInputs in = node_inputs(spec, grid);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const MetricPoint<double> mp =
          surface_metric(Vec2<double>(in.fx(j, i), in.fy(j, i)), in.alpha(j, i), spec.dL, spec.dT);
      store_metric(m, i, j, mp.lower, mp.upper, mp.sqrt_g);
    }
  std::array<std::array<Field, 3>, 2> dg;  // dg[k][component]
  for (int c = 0; c < 3; ++c) {
    dg[0][c] = diff_x(m.lower[c], grid.dx);
    dg[1][c] = diff_y(m.lower[c], grid.dx);
  }
  auto mat = [](const std::array<Field, 3>& f, int i, int j) {
    Mat2<double> a;
    a << f[0](j, i), f[1](j, i), f[1](j, i), f[2](j, i);
    return a;
  };
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const std::array<Mat2<double>, 2> d{mat(dg[0], i, j), mat(dg[1], i, j)};
      store_christoffel(m, i, j, christoffel_symbols<double>(mat(m.upper, i, j), d));
    }
  std::array<std::array<Field, 6>, 2> dgam;
  for (int c = 0; c < 6; ++c) {
    dgam[0][c] = diff_x(m.christoffel[c], grid.dx);
    dgam[1][c] = diff_y(m.christoffel[c], grid.dx);
  }
  auto unpack = [](const std::array<Field, 6>& f, int i, int j) {
    Christoffel<double> G;
    for (int A = 0; A < 2; ++A) {
      G[A][0][0] = f[3 * A + 0](j, i);
      G[A][0][1] = G[A][1][0] = f[3 * A + 1](j, i);
      G[A][1][1] = f[3 * A + 2](j, i);
    }
    return G;
  };
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const std::array<Christoffel<double>, 2> dG{unpack(dgam[0], i, j), unpack(dgam[1], i, j)};
      m.ricci(j, i) = ricci_from_christoffel<double>(mat(m.upper, i, j), unpack(m.christoffel, i, j), dG);
    }
  return m;
}

}  // namespace

bool SurfaceSpec::analytic() const { return !tabulated_shape(*this) && !tabulated_fiber(*this); }

void SurfaceSpec::validate() const {
  if (!(dT > 0.0) || !(dL >= dT)) throw std::invalid_argument("surface: require d_L >= d_T > 0");
  if (!(D0 > 0.0)) throw std::invalid_argument("surface: require D0 > 0");
  const GridGeometry g = grid();  // checks L, dx and integrality of L/dx
  if (const auto* p = std::get_if<ParaboloidShape>(&shape)) {
    if (p->sign != 1 && p->sign != -1) throw std::invalid_argument("surface: paraboloid sign must be +1 or -1");
    if (!std::isfinite(p->A)) throw std::invalid_argument("surface: paraboloid coefficient must be finite");
  }
  if (const auto* t = std::get_if<TabulatedShape>(&shape)) check_samples(g, t->grid, t->z, "shape");
  if (const auto* t = std::get_if<TabulatedFiber>(&fiber)) check_samples(g, t->grid, t->alpha, "fiber");
}

SurfaceSpec SurfaceSpec::isotropic() const {
  SurfaceSpec s = *this;
  s.dL = s.dT = 1.0;
  return s;
}

FiberFrame<double> fiber_frame(const SurfaceSpec& spec, double x, double y) {
  return fiber_frame(shape_gradient(spec.shape, x, y), fiber_angle(spec.fiber, x, y));
}

Mat3<double> diffusion_tensor_3d(const SurfaceSpec& spec, double x, double y) {
  return diffusion_tensor_3d(fiber_frame(spec, x, y).eL, spec.dL * spec.D0, spec.dT * spec.D0);
}

CurvatureSample curvature_at(const SurfaceSpec& spec, double x, double y) {
  const Dual<double> R = ricci_at<Dual<double>>(spec, x, y);
  const MetricPoint<double> m = induced_metric(spec, x, y);
  CurvatureSample s;
  s.R = R.v;
  s.grad = Eigen::Vector2d(R.d[0], R.d[1]);
  s.upper = m.upper;
  s.sqrt_g = m.sqrt_g;
  return s;
}

Eigen::Matrix2d MetricField::lower_at(int i, int j) const {
  Eigen::Matrix2d a;
  a << lower[0](j, i), lower[1](j, i), lower[1](j, i), lower[2](j, i);
  return a;
}

Eigen::Matrix2d MetricField::upper_at(int i, int j) const {
  Eigen::Matrix2d a;
  a << upper[0](j, i), upper[1](j, i), upper[1](j, i), upper[2](j, i);
  return a;
}

MetricField christoffel_and_ricci(const SurfaceSpec& spec, DerivativeMode mode) {
  spec.validate();
  return use_analytic(spec, mode) ? analytic_metric_field(spec) : fd_metric_field(spec);
}

RicciDecomposition ricci_decomposition(const SurfaceSpec& spec, DerivativeMode mode) {
  spec.validate();
  const GridGeometry grid = spec.grid();
  RicciDecomposition out;
  out.shape = grid.zeros();
  out.aniso = grid.zeros();
  if (use_analytic(spec, mode)) {
    const SurfaceSpec iso = spec.isotropic();
#pragma omp parallel for schedule(static)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        out.shape(j, i) = ricci_at<double>(iso, grid.x(i), grid.y(j));
        out.aniso(j, i) = aniso_curvature_at<double>(spec, grid.x(i), grid.y(j));
      }
    return out;
  }
  out.reduced_band = 2 * kReducedOrderBand;
  out.shape = christoffel_and_ricci(spec.isotropic(), DerivativeMode::FiniteDifference).ricci;
  const NodeInputs in = node_inputs(spec, grid);
  Field sqrtG = grid.zeros(), e1 = grid.zeros(), e2 = grid.zeros();
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2<double> slope(in.fx(j, i), in.fy(j, i));
      sqrtG(j, i) = surface_metric(slope, in.alpha(j, i), 1.0, 1.0).sqrt_g;
      const FiberFrame<double> fr = fiber_frame(slope, in.alpha(j, i));
      e1(j, i) = fr.eL(0);
      e2(j, i) = fr.eL(1);
    }
  const Field q1 = sqrtG * e1;
  const Field q2 = sqrtG * e2;
  const Field div = (diff_x(q1, grid.dx) + diff_y(q2, grid.dx)) / sqrtG;
  out.aniso = -2.0 * (diff_x(q1 * div, grid.dx) + diff_y(q2 * div, grid.dx)) / sqrtG;
  return out;
}

}  // namespace spiraldrift
