#include "spiraldrift/driftlaw.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spiraldrift {

MobilityCoefficients MobilityCoefficients::mirrored() const {
  MobilityCoefficients m = *this;
  m.q2 = -q2;
  m.chirality = -chirality;
  return m;
}

MobilityCoefficients MobilityCoefficients::for_chirality(int target) const {
  if (target != 1 && target != -1) throw std::invalid_argument("chirality must be +1 or -1");
  return target == chirality ? *this : mirrored();
}

// ---------------------------------------------------------------------------

BicubicSample bicubic(const GridGeometry& grid, const Field& f, double x, double y) {
  const double fx = (x - grid.x0) / grid.dx;
  const double fy = (y - grid.y0) / grid.dx;
  const int i0 = std::clamp(static_cast<int>(std::floor(fx)), 0, grid.nx - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor(fy)), 0, grid.ny - 2);
  const double tx = fx - i0, ty = fy - j0;
  auto weights = [](double t, double w[4], double d[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
    d[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
    d[1] = 0.5 * (9.0 * t2 - 10.0 * t);
    d[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
    d[3] = 0.5 * (3.0 * t2 - 2.0 * t);
  };
  double wx[4], dwx[4], wy[4], dwy[4];
  weights(tx, wx, dwx);
  weights(ty, wy, dwy);
  BicubicSample s;
  for (int b = 0; b < 4; ++b) {
    const int j = std::clamp(j0 - 1 + b, 0, grid.ny - 1);
    double row = 0.0, drow = 0.0;
    for (int a = 0; a < 4; ++a) {
      const double v = f(j, std::clamp(i0 - 1 + a, 0, grid.nx - 1));
      row += wx[a] * v;
      drow += dwx[a] * v;
    }
    s.value += wy[b] * row;
    s.grad(0) += wy[b] * drow;
    s.grad(1) += dwy[b] * row;
  }
  s.grad /= grid.dx;
  return s;
}

RicciField::RicciField(SurfaceSpec spec) : spec_(std::move(spec)) {
  spec_->validate();
  if (!spec_->analytic()) throw std::invalid_argument("RicciField: spec has no closed form; sample it first");
  xmin_ = ymin_ = -0.5 * spec_->L;
  xmax_ = ymax_ = 0.5 * spec_->L;
}

RicciField::RicciField(MetricField metric) : metric_(std::move(metric)) {
  const GridGeometry& g = metric_->grid;
  xmin_ = g.x0;
  ymin_ = g.y0;
  xmax_ = g.x(g.nx - 1);
  ymax_ = g.y(g.ny - 1);
}

RicciField RicciField::from_spec(const SurfaceSpec& spec, DerivativeMode mode) {
  if (spec.analytic() && mode != DerivativeMode::FiniteDifference) return RicciField(spec);
  return RicciField(christoffel_and_ricci(spec, mode));
}

bool RicciField::contains(double x, double y) const {
  return x >= xmin_ && x <= xmax_ && y >= ymin_ && y <= ymax_;
}

CurvatureSample RicciField::at(double x, double y) const {
  if (!contains(x, y)) throw std::out_of_range("RicciField: point outside the domain");
  if (spec_) return curvature_at(*spec_, x, y);
  const MetricField& m = *metric_;
  CurvatureSample c;
  const BicubicSample r = bicubic(m.grid, m.ricci, x, y);
  c.R = r.value;
  c.grad = r.grad;
  const double u11 = bicubic(m.grid, m.upper[0], x, y).value;
  const double u12 = bicubic(m.grid, m.upper[1], x, y).value;
  const double u22 = bicubic(m.grid, m.upper[2], x, y).value;
  c.upper << u11, u12, u12, u22;
  c.sqrt_g = bicubic(m.grid, m.sqrt_g, x, y).value;
  return c;
}

// ---------------------------------------------------------------------------

Eigen::Vector2d eom_velocity(const CurvatureSample& c, const MobilityCoefficients& q) {
  // eps^BA d_B R: A = 1 -> eps^21 d_2 R = -d_2 R; A = 2 -> eps^12 d_1 R = d_1 R.
  const Eigen::Vector2d rot(-c.grad(1), c.grad(0));
  return -q.q1 * (c.upper * c.grad) - (q.q2 / c.sqrt_g) * rot;
}

Eigen::Vector2d eom_velocity(const RicciField& field, double x, double y, const MobilityCoefficients& q) {
  return eom_velocity(field.at(x, y), q);
}

Eigen::Vector2d eom_velocity_fiber_form(const Eigen::Vector2d& slope, const FiberFrame<double>& frame,
                                        const Eigen::Vector2d& dR, double dL, double dT,
                                        const MobilityCoefficients& q) {
  Eigen::Matrix<double, 3, 2> E;  // tangent vectors d_A r as columns
  E << 1.0, 0.0, 0.0, 1.0, slope(0), slope(1);
  const Eigen::Matrix2d G = E.transpose() * E;
  const Eigen::Matrix2d Ginv = inverse2(G);
  const Eigen::Vector3d grad = E * (Ginv * dR);
  const Eigen::Vector3d V = -q.q1 * (dL * frame.eL * frame.eL.dot(grad) + dT * frame.eT * frame.eT.dot(grad)) -
                            q.q2 * std::sqrt(dL * dT) * frame.eN.cross(grad);
  return Ginv * (E.transpose() * V);
}

Eigen::Vector2d eom_velocity_fiber_form(const SurfaceSpec& spec, double x, double y, const MobilityCoefficients& q) {
  const Eigen::Vector2d slope = shape_gradient<double>(spec.shape, x, y);
  const CurvatureSample c = curvature_at(spec, x, y);
  return eom_velocity_fiber_form(slope, fiber_frame(spec, x, y), c.grad, spec.dL, spec.dT, q);
}

// ---------------------------------------------------------------------------

namespace {

struct RunResult {
  std::vector<DriftPoint> points;
  bool exited = false;
};

RunResult rk4_run(const Eigen::Vector2d& x0, double t_end, long n, long stride, const RicciField& field,
                  const MobilityCoefficients& q, double margin) {
  const double h = t_end / static_cast<double>(n);
  auto inside = [&](const Eigen::Vector2d& p) {
    return p(0) >= field.xmin() + margin && p(0) <= field.xmax() - margin && p(1) >= field.ymin() + margin &&
           p(1) <= field.ymax() - margin;
  };
  auto vel = [&](const Eigen::Vector2d& p, bool& ok) -> Eigen::Vector2d {
    if (!inside(p)) {
      ok = false;
      return Eigen::Vector2d::Zero();
    }
    return eom_velocity(field, p(0), p(1), q);
  };
  RunResult r;
  Eigen::Vector2d x = x0;
  r.points.push_back({0.0, x(0), x(1)});
  for (long k = 1; k <= n; ++k) {
    bool ok = true;
    const Eigen::Vector2d k1 = vel(x, ok);
    const Eigen::Vector2d k2 = ok ? vel(x + 0.5 * h * k1, ok) : k1;
    const Eigen::Vector2d k3 = ok ? vel(x + 0.5 * h * k2, ok) : k2;
    const Eigen::Vector2d k4 = ok ? vel(x + h * k3, ok) : k3;
    const Eigen::Vector2d next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!ok || !inside(next)) {
      r.exited = true;
      const double t_last = static_cast<double>(k - 1) * h;
      if (r.points.back().t != t_last) r.points.push_back({t_last, x(0), x(1)});
      return r;
    }
    x = next;
    if (k % stride == 0 || k == n) r.points.push_back({k == n ? t_end : static_cast<double>(k) * h, x(0), x(1)});
  }
  return r;
}

// Endpoint distance, or the distance at the latest sample time both runs
// reached when one of them left the domain.
double common_gap(const RunResult& a, const RunResult& b) {
  if (!a.exited && !b.exited) {
    const auto& p = a.points.back();
    const auto& s = b.points.back();
    return std::hypot(p.x - s.x, p.y - s.y);
  }
  std::size_t ia = a.points.size(), ib = b.points.size();
  while (ia > 0 && ib > 0) {
    const auto& p = a.points[ia - 1];
    const auto& s = b.points[ib - 1];
    if (p.t == s.t) return std::hypot(p.x - s.x, p.y - s.y);
    if (p.t > s.t) --ia;
    else --ib;
  }
  return 0.0;
}

}  // namespace

DriftPath integrate_drift(const Eigen::Vector2d& x0, double t_end, const RicciField& field,
                          const MobilityCoefficients& q, const IntegrateOptions& options) {
  if (!(t_end >= 0.0)) throw std::invalid_argument("integrate_drift: t_end must be non-negative");
  if (!field.contains(x0(0), x0(1))) throw std::out_of_range("integrate_drift: start point outside the domain");
  DriftPath path;
  if (t_end == 0.0) {
    path.points.push_back({0.0, x0(0), x0(1)});
    return path;
  }
  const double h0 = options.initial_step > 0.0 ? options.initial_step : t_end / 64.0;
  long n = std::max(1L, static_cast<long>(std::ceil(t_end / h0)));
  auto stride_for = [&](long steps) {
    if (options.sample_dt <= 0.0) return 1L;
    return std::max(1L, std::lround(options.sample_dt / (t_end / static_cast<double>(steps))));
  };
  // Fix the sample stride on the coarsest grid and double it with each
  // halving so all runs share sample times.
  long stride = stride_for(n);
  RunResult coarse = rk4_run(x0, t_end, n, stride, field, q, options.margin);
  for (int k = 0; k < options.max_halvings; ++k) {
    n *= 2;
    stride *= 2;
    RunResult fine = rk4_run(x0, t_end, n, stride, field, q, options.margin);
    const double gap = common_gap(coarse, fine);
    coarse = std::move(fine);
    if (gap < options.tolerance) {
      path.points = std::move(coarse.points);
      path.step = t_end / static_cast<double>(n);
      path.status = coarse.exited ? DriftStatus::ExitedDomain : DriftStatus::Completed;
      return path;
    }
  }
  throw std::runtime_error("integrate_drift: step control did not converge");
}

double rotation_frequency(double R, const MobilityCoefficients& q) { return q.omega0 + q.q0 * R; }

// ---------------------------------------------------------------------------

std::variant<double, PureTransverseDrift> paraboloid_trajectory(double r, double A, double q1, double q2,
                                                                double C1) {
  if (q1 == 0.0) return PureTransverseDrift{};
  if (!(r > 0.0)) throw std::invalid_argument("paraboloid_trajectory: r must be positive");
  if (A == 0.0) throw std::invalid_argument("paraboloid_trajectory: A must be non-zero");
  const double s = std::sqrt(1.0 + 4.0 * A * A * r * r);
  const double acoth = 0.5 * std::log((s + 1.0) / (s - 1.0));
  return (q2 / q1) * (s - acoth) + C1;
}

double paraboloid_constant(double r0, double phi0, double A, double q1, double q2) {
  const auto v = paraboloid_trajectory(r0, A, q1, q2, 0.0);
  if (std::holds_alternative<PureTransverseDrift>(v))
    throw std::invalid_argument("paraboloid_constant: q1 = 0 has no closed form");
  return phi0 - std::get<double>(v);
}

namespace {

double planar_w(double z, double B, double dL, double dT, double q1, double q2) {
  const double a = B * z;
  const double s = std::sqrt(dL * dT);
  const double log_term = std::log((dL - dT) * std::sin(2.0 * a) + dL + dT) / (2.0 * B);
  const double branch = std::numbers::pi * std::floor((a + 0.5 * std::numbers::pi) / std::numbers::pi);
  const double at = std::atan(((dL + dT) * std::tan(a) + (dL - dT)) / (2.0 * s)) + branch;
  return log_term - (q2 / (q1 * B)) * at;
}

void check_planar(double B, double dL, double dT) {
  if (B == 0.0) throw std::invalid_argument("planar_trajectory: B must be non-zero");
  if (!(dT > 0.0) || dL < dT) throw std::invalid_argument("planar_trajectory: need dL >= dT > 0");
}

}  // namespace

std::variant<Eigen::Vector2d, PureTransverseDrift> planar_trajectory(double z, double B, double dL, double dT,
                                                                     double q1, double q2, double C2) {
  if (q1 == 0.0) return PureTransverseDrift{};
  check_planar(B, dL, dT);
  const double w = planar_w(z, B, dL, dT, q1, q2) + C2;
  return Eigen::Vector2d(0.5 * (z + w), 0.5 * (z - w));
}

double planar_slope(double z, double B, double dL, double dT, double q1, double q2) {
  if (q1 == 0.0) throw std::invalid_argument("planar_slope: q1 = 0 has no closed form");
  const double a = B * z;
  const double G = dL + dT + (dL - dT) * std::sin(2.0 * a);
  return ((dL - dT) * std::cos(2.0 * a) - (q2 / q1) * 2.0 * std::sqrt(dL * dT)) / G;
}

double planar_constant(const Eigen::Vector2d& start, double B, double dL, double dT, double q1, double q2) {
  if (q1 == 0.0) throw std::invalid_argument("planar_constant: q1 = 0 has no closed form");
  check_planar(B, dL, dT);
  const double z = start(0) + start(1);
  const double w = start(0) - start(1);
  return w - planar_w(z, B, dL, dT, q1, q2);
}

std::string to_string(DriftStatus s) { return s == DriftStatus::Completed ? "completed" : "exited_domain"; }

}  // namespace spiraldrift
