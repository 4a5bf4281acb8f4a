#pragma once

// Diffusion-induced surface metric, Christoffel symbols and Ricci scalar for
// graphs z = f(x, y) carrying a tangent fiber field.
//
// The point kernels below are templated on the scalar type. Evaluated with
// nested Dual numbers they give exact metric derivatives, which is how the
// analytic curvature path works; evaluated with double on grid samples they
// feed the finite-difference path.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "spiraldrift/dual.hpp"
#include "spiraldrift/grid.hpp"

namespace spiraldrift {

template <typename S>
using Vec2 = Eigen::Matrix<S, 2, 1>;
template <typename S>
using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat2 = Eigen::Matrix<S, 2, 2>;
template <typename S>
using Mat3 = Eigen::Matrix<S, 3, 3>;

// ---------------------------------------------------------------------------
// Surface description

struct PlaneShape {};

/// z = sign * A * (x^2 + y^2)
struct ParaboloidShape {
  double A = 0.0;
  int sign = -1;
};

/// Height samples on the simulation grid; derivatives by finite differences.
struct TabulatedShape {
  GridGeometry grid;
  Field z;
};

using Shape = std::variant<PlaneShape, ParaboloidShape, TabulatedShape>;

struct ConstantFiber {
  double alpha0 = 0.0;
};

/// alpha = B * (x + y)
struct LinearFiber {
  double B = 0.0;
};

struct TabulatedFiber {
  GridGeometry grid;
  Field alpha;
};

using FiberField = std::variant<ConstantFiber, LinearFiber, TabulatedFiber>;

struct SurfaceSpec {
  Shape shape = PlaneShape{};
  FiberField fiber = ConstantFiber{};
  double dL = 1.0;
  double dT = 1.0;
  double D0 = 1.0;
  double L = 40.0;
  double dx = 0.1;

  GridGeometry grid() const { return GridGeometry::square(L, dx); }
  /// True when both the shape and the fiber field have closed-form derivatives.
  bool analytic() const;
  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  /// Same surface with isotropic unit diffusion (the auxiliary metric G).
  SurfaceSpec isotropic() const;
};

// ---------------------------------------------------------------------------
// Closed-form fields

template <typename S>
Vec2<S> shape_gradient(const Shape& shape, const S& x, const S& y) {
  return std::visit(
      [&](const auto& s) -> Vec2<S> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PlaneShape>) {
          return Vec2<S>(S(0.0), S(0.0));
        } else if constexpr (std::is_same_v<T, ParaboloidShape>) {
          const double c = 2.0 * s.sign * s.A;
          return Vec2<S>(x * c, y * c);
        } else {
          throw std::invalid_argument("tabulated shape has no closed-form derivatives");
        }
      },
      shape);
}

template <typename S>
S fiber_angle(const FiberField& fiber, const S& x, const S& y) {
  return std::visit(
      [&](const auto& f) -> S {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantFiber>) {
          return S(f.alpha0);
        } else if constexpr (std::is_same_v<T, LinearFiber>) {
          return (x + y) * f.B;
        } else {
          throw std::invalid_argument("tabulated fiber field has no closed-form derivatives");
        }
      },
      fiber);
}

// ---------------------------------------------------------------------------
// Local frame and metric

template <typename S>
struct FiberFrame {
  Vec3<S> eL;
  Vec3<S> eT;
  Vec3<S> eN;
};

/// Frame from the local slope (df/dx, df/dy) and projected fiber angle.
/// e_N has positive z-component; e_T = e_N x e_L.
template <typename S>
FiberFrame<S> fiber_frame(const Vec2<S>& slope, const S& alpha) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  if (!std::isfinite(value_of(slope(0))) || !std::isfinite(value_of(slope(1))))
    throw std::domain_error("fiber_frame: non-finite surface slope");
  const S c = cos(alpha);
  const S s = sin(alpha);
  const S lz = c * slope(0) + s * slope(1);
  const S invN = S(1.0) / sqrt(S(1.0) + lz * lz);
  FiberFrame<S> fr;
  fr.eL = Vec3<S>(c * invN, s * invN, lz * invN);
  const S invM = S(1.0) / sqrt(S(1.0) + slope(0) * slope(0) + slope(1) * slope(1));
  fr.eN = Vec3<S>(-slope(0) * invM, -slope(1) * invM, invM);
  fr.eT = fr.eN.cross(fr.eL);
  return fr;
}

FiberFrame<double> fiber_frame(const SurfaceSpec& spec, double x, double y);

/// D^{ij} = D_T delta^{ij} + (D_L - D_T) e_L^i e_L^j.
template <typename S>
Mat3<S> diffusion_tensor_3d(const Vec3<S>& eL, double DL, double DT) {
  Mat3<S> D = (eL * eL.transpose()) * S(DL - DT);
  for (int i = 0; i < 3; ++i) D(i, i) += S(DT);
  return D;
}

Mat3<double> diffusion_tensor_3d(const SurfaceSpec& spec, double x, double y);

template <typename S>
Mat2<S> inverse2(const Mat2<S>& m) {
  const S det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  Mat2<S> inv;
  inv(0, 0) = m(1, 1) / det;
  inv(1, 1) = m(0, 0) / det;
  inv(0, 1) = -m(0, 1) / det;
  inv(1, 0) = -m(1, 0) / det;
  return inv;
}

template <typename S>
struct MetricPoint {
  Mat2<S> lower;
  Mat2<S> upper;
  S sqrt_g;
};

/// Surface metric g_AB in the chart s = (x, y). The ambient metric is
/// g_ij = D0 (D^{-1})_ij = delta_ij / d_T + (1/d_L - 1/d_T) e_L^i e_L^j,
/// pulled back along the graph embedding.
template <typename S>
MetricPoint<S> surface_metric(const Vec2<S>& slope, const S& alpha, double dL, double dT) {
  using std::sqrt;
  const FiberFrame<S> fr = fiber_frame(slope, alpha);
  const double a = 1.0 / dT;
  const double b = 1.0 / dL - 1.0 / dT;
  auto amb = [&](int i, int j) {
    S v = fr.eL(i) * fr.eL(j) * b;
    if (i == j) v = v + a;
    return v;
  };
  const S& fx = slope(0);
  const S& fy = slope(1);
  MetricPoint<S> m;
  m.lower(0, 0) = amb(0, 0) + amb(0, 2) * fx * 2.0 + amb(2, 2) * fx * fx;
  m.lower(1, 1) = amb(1, 1) + amb(1, 2) * fy * 2.0 + amb(2, 2) * fy * fy;
  m.lower(0, 1) = amb(0, 1) + amb(0, 2) * fy + amb(1, 2) * fx + amb(2, 2) * fx * fy;
  m.lower(1, 0) = m.lower(0, 1);
  m.upper = inverse2(m.lower);
  m.sqrt_g = sqrt(m.lower(0, 0) * m.lower(1, 1) - m.lower(0, 1) * m.lower(1, 0));
  return m;
}

template <typename S>
MetricPoint<S> induced_metric(const SurfaceSpec& spec, const S& x, const S& y) {
  return surface_metric(shape_gradient(spec.shape, x, y), fiber_angle(spec.fiber, x, y), spec.dL, spec.dT);
}

// ---------------------------------------------------------------------------
// Connection and curvature

/// Gamma[A][B][C] = Gamma^A_BC.
template <typename S>
using Christoffel = std::array<std::array<std::array<S, 2>, 2>, 2>;

/// Gamma^A_BC = (g^AD / 2)(d_B g_CD + d_C g_BD - d_D g_BC), with dg[k] = d_k g.
template <typename S>
Christoffel<S> christoffel_symbols(const Mat2<S>& upper, const std::array<Mat2<S>, 2>& dg) {
  Christoffel<S> G;
  for (int A = 0; A < 2; ++A)
    for (int B = 0; B < 2; ++B)
      for (int C = B; C < 2; ++C) {
        S acc(0.0);
        for (int D = 0; D < 2; ++D) acc = acc + upper(A, D) * (dg[B](C, D) + dg[C](B, D) - dg[D](B, C));
        G[A][B][C] = acc * 0.5;
        G[A][C][B] = G[A][B][C];
      }
  return G;
}

/// R = g^BC (d_A Gamma^A_BC - d_C Gamma^A_AB + Gamma^A_AD Gamma^D_BC - Gamma^A_CD Gamma^D_AB),
/// with dG[k] = d_k Gamma.
template <typename S>
S ricci_from_christoffel(const Mat2<S>& upper, const Christoffel<S>& G, const std::array<Christoffel<S>, 2>& dG) {
  S R(0.0);
  for (int B = 0; B < 2; ++B)
    for (int C = 0; C < 2; ++C) {
      S ric(0.0);
      for (int A = 0; A < 2; ++A) {
        ric = ric + dG[A][A][B][C] - dG[C][A][A][B];
        for (int D = 0; D < 2; ++D) ric = ric + G[A][A][D] * G[D][B][C] - G[A][C][D] * G[D][A][B];
      }
      R = R + upper(B, C) * ric;
    }
  return R;
}

/// Christoffel symbols (with their gradient in the outer Dual layer) from a
/// metric carried to second order.
template <typename S>
Christoffel<Dual<S>> christoffel_from_metric(const Mat2<Dual<Dual<S>>>& g) {
  Mat2<Dual<S>> g1;
  std::array<Mat2<Dual<S>>, 2> dg;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      g1(i, j) = g(i, j).v;
      dg[0](i, j) = g(i, j).d[0];
      dg[1](i, j) = g(i, j).d[1];
    }
  return christoffel_symbols<Dual<S>>(inverse2(g1), dg);
}

template <typename S>
S ricci_from_metric(const Mat2<Dual<Dual<S>>>& g) {
  const Christoffel<Dual<S>> Gd = christoffel_from_metric<S>(g);
  Mat2<S> upper0;
  {
    Mat2<S> g0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) g0(i, j) = g(i, j).v.v;
    upper0 = inverse2(g0);
  }
  Christoffel<S> G;
  std::array<Christoffel<S>, 2> dG;
  for (int A = 0; A < 2; ++A)
    for (int B = 0; B < 2; ++B)
      for (int C = 0; C < 2; ++C) {
        G[A][B][C] = Gd[A][B][C].v;
        dG[0][A][B][C] = Gd[A][B][C].d[0];
        dG[1][A][B][C] = Gd[A][B][C].d[1];
      }
  return ricci_from_christoffel<S>(upper0, G, dG);
}

/// Ricci scalar at a point from closed-form derivatives. With S = double
/// returns R; with S = Dual<double> also returns its gradient.
template <typename S = double>
S ricci_at(const SurfaceSpec& spec, double x, double y) {
  using D2 = Dual<Dual<S>>;
  const auto c = lift<D2>(x, y);
  return ricci_from_metric<S>(induced_metric(spec, c.x, c.y).lower);
}

/// -2 div_G[e_L div_G(e_L)] at a point, G being the isotropic metric of the
/// same surface, from closed-form derivatives.
template <typename S = double>
S aniso_curvature_at(const SurfaceSpec& spec, double x, double y) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  using D2 = Dual<Dual<S>>;
  const auto c = lift<D2>(x, y);
  const Vec2<D2> slope = shape_gradient(spec.shape, c.x, c.y);
  const D2 alpha = fiber_angle(spec.fiber, c.x, c.y);
  const MetricPoint<D2> G = surface_metric(slope, alpha, 1.0, 1.0);
  const FiberFrame<D2> fr = fiber_frame(slope, alpha);
  // Chart components of e_L: e_L = e^1 d_x r + e^2 d_y r.
  const D2 q1 = G.sqrt_g * fr.eL(0);
  const D2 q2 = G.sqrt_g * fr.eL(1);
  const Dual<S> div = (q1.d[0] + q2.d[1]) / G.sqrt_g.v;
  const Dual<S> p1 = q1.v * div;
  const Dual<S> p2 = q2.v * div;
  return (p1.d[0] + p2.d[1]) * (-2.0) / G.sqrt_g.v.v;
}

/// Curvature data at a point used by the drift law.
struct CurvatureSample {
  double R = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();  // d_A R
  Eigen::Matrix2d upper = Eigen::Matrix2d::Identity();
  double sqrt_g = 1.0;
};

CurvatureSample curvature_at(const SurfaceSpec& spec, double x, double y);

// ---------------------------------------------------------------------------
// Grid-sampled geometry

enum class DerivativeMode { Auto, Analytic, FiniteDifference };

struct MetricField {
  GridGeometry grid;
  bool analytic = false;
  /// Nodes within this many nodes of the edge carry lower-order derivatives.
  int reduced_band = 0;
  std::array<Field, 3> lower;  // g_11, g_12, g_22
  std::array<Field, 3> upper;  // g^11, g^12, g^22
  Field sqrt_g;
  /// Gamma^A_BC stored once per symmetric pair: index 3*A + {(0,0)->0, (0,1)->1, (1,1)->2}.
  std::array<Field, 6> christoffel;
  Field ricci;

  const Field& gamma(int A, int B, int C) const { return christoffel[3 * A + B + C]; }
  Eigen::Matrix2d lower_at(int i, int j) const;
  Eigen::Matrix2d upper_at(int i, int j) const;
  bool reduced_accuracy(int i, int j) const {
    return i < reduced_band || j < reduced_band || i >= grid.nx - reduced_band || j >= grid.ny - reduced_band;
  }
  /// Alternating symbol with epsilon_12 = +1.
  static constexpr double levi_civita(int A, int B) { return A == B ? 0.0 : (A == 0 ? 1.0 : -1.0); }
};

/// Samples g_AB, g^AB, sqrt(g), Gamma and R on the spec's grid.
MetricField christoffel_and_ricci(const SurfaceSpec& spec, DerivativeMode mode = DerivativeMode::Auto);

struct RicciDecomposition {
  Field shape;  // R of the isotropic metric G (2 K_G)
  Field aniso;  // -2 div_G[e_L div_G e_L]
  int reduced_band = 0;
};

RicciDecomposition ricci_decomposition(const SurfaceSpec& spec, DerivativeMode mode = DerivativeMode::Auto);

}  // namespace spiraldrift
