#pragma once

// Forward-mode dual numbers in the two surface coordinates (x, y).
//
// Nesting gives higher derivatives: Dual<Dual<double>> carries the value,
// gradient and Hessian of a field; Dual<Dual<Dual<double>>> adds third
// derivatives. All geometry kernels are templated on the scalar so the
// same code path yields a value, its gradient or its curvature.

#include <array>
#include <cmath>
#include <utility>

#include <Eigen/Core>

namespace spiraldrift {

template <typename T>
struct Dual {
  T v{};
  std::array<T, 2> d{};

  Dual() = default;
  Dual(double c) : v(c), d{T(0.0), T(0.0)} {}  // NOLINT: implicit constants
  Dual(T value, T dx, T dy) : v(std::move(value)), d{std::move(dx), std::move(dy)} {}

  Dual& operator+=(const Dual& o) { v += o.v; d[0] += o.d[0]; d[1] += o.d[1]; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d[0] -= o.d[0]; d[1] -= o.d[1]; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }

  friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d[0] + b.d[0], a.d[1] + b.d[1]}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d[0] - b.d[0], a.d[1] - b.d[1]}; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.d[0], -a.d[1]}; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.d[0] * b.v + a.v * b.d[0], a.d[1] * b.v + a.v * b.d[1]};
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const T inv = T(1.0) / b.v;
    const T q = a.v * inv;
    return {q, (a.d[0] - q * b.d[0]) * inv, (a.d[1] - q * b.d[1]) * inv};
  }
  friend Dual operator*(const Dual& a, double s) { return {a.v * s, a.d[0] * s, a.d[1] * s}; }
  friend Dual operator*(double s, const Dual& a) { return a * s; }
  friend Dual operator/(const Dual& a, double s) { return a * (1.0 / s); }
  friend Dual operator+(const Dual& a, double s) { return {a.v + s, a.d[0], a.d[1]}; }
  friend Dual operator+(double s, const Dual& a) { return a + s; }
  friend Dual operator-(const Dual& a, double s) { return {a.v - s, a.d[0], a.d[1]}; }
  friend Dual operator-(double s, const Dual& a) { return {s - a.v, -a.d[0], -a.d[1]}; }
  friend Dual operator/(double s, const Dual& a) { return Dual(s) / a; }
};

// Chain rule helper: f(a) with f(a.v) and f'(a.v) supplied.
template <typename T>
Dual<T> chain(const Dual<T>& a, const T& f, const T& df) {
  return {f, df * a.d[0], df * a.d[1]};
}

template <typename T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return chain(a, sin(a.v), cos(a.v));
}
template <typename T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return chain(a, cos(a.v), -sin(a.v));
}
template <typename T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  const T s = sqrt(a.v);
  return chain(a, s, T(0.5) / s);
}
template <typename T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.v);
  return chain(a, e, e);
}
template <typename T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return chain(a, log(a.v), T(1.0) / a.v);
}
template <typename T>
Dual<T> atan(const Dual<T>& a) {
  using std::atan;
  return chain(a, atan(a.v), T(1.0) / (T(1.0) + a.v * a.v));
}

// Strip all derivative layers.
inline double value_of(double x) { return x; }
template <typename T>
double value_of(const Dual<T>& x) {
  return value_of(x.v);
}

// Independent variables x and y at (x0, y0) lifted to scalar type S, where
// every nesting level differentiates with respect to the same pair (x, y).
template <typename S>
struct Coordinates {
  S x;
  S y;
};

namespace detail {
template <typename S>
struct Lifter {
  static S make(double c, int) { return S(c); }
};
template <>
struct Lifter<double> {
  static double make(double c, int) { return c; }
};
template <typename T>
struct Lifter<Dual<T>> {
  static Dual<T> make(double c, int axis) {
    Dual<T> out(Lifter<T>::make(c, axis), T(0.0), T(0.0));
    out.d[axis] = T(1.0);
    return out;
  }
};
}  // namespace detail

template <typename S>
Coordinates<S> lift(double x, double y) {
  return {detail::Lifter<S>::make(x, 0), detail::Lifter<S>::make(y, 1)};
}

}  // namespace spiraldrift

namespace Eigen {
template <typename T>
struct NumTraits<spiraldrift::Dual<T>> : NumTraits<double> {
  using Real = spiraldrift::Dual<T>;
  using NonInteger = spiraldrift::Dual<T>;
  using Nested = spiraldrift::Dual<T>;
  using Literal = spiraldrift::Dual<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 3,
    AddCost = 3,
    MulCost = 9
  };
};

template <typename T, typename BinaryOp>
struct ScalarBinaryOpTraits<spiraldrift::Dual<T>, double, BinaryOp> {
  using ReturnType = spiraldrift::Dual<T>;
};
template <typename T, typename BinaryOp>
struct ScalarBinaryOpTraits<double, spiraldrift::Dual<T>, BinaryOp> {
  using ReturnType = spiraldrift::Dual<T>;
};
}  // namespace Eigen
