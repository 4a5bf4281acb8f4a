#include "spiraldrift/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

namespace spiraldrift {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Time at which the unwrapped phase reaches `target`, searching from sample
// `from` forwards (dir = +1) or backwards (dir = -1). Linear in between.
std::optional<double> time_at_phase(const std::vector<TipSample>& s, std::size_t from, double target, int dir,
                                    double sense) {
  if (dir > 0) {
    for (std::size_t k = from; k + 1 < s.size(); ++k) {
      const double a = sense * (s[k].phase - target), b = sense * (s[k + 1].phase - target);
      if (a <= 0.0 && b >= 0.0 && b != a) return s[k].t + (s[k + 1].t - s[k].t) * (-a / (b - a));
    }
  } else {
    for (std::size_t k = from; k > 0; --k) {
      const double a = sense * (s[k - 1].phase - target), b = sense * (s[k].phase - target);
      if (a <= 0.0 && b >= 0.0 && b != a) return s[k - 1].t + (s[k].t - s[k - 1].t) * (-a / (b - a));
    }
  }
  return std::nullopt;
}

// Centre at time t0 from the samples in [ta, tb].
std::optional<Eigen::Vector2d> window_center(const std::vector<TipSample>& s, double ta, double tb, double t0) {
  const auto lo = std::lower_bound(s.begin(), s.end(), ta, [](const TipSample& p, double t) { return p.t < t; });
  std::vector<std::size_t> idx;
  for (auto it = lo; it != s.end() && it->t <= tb; ++it) idx.push_back(static_cast<std::size_t>(it - s.begin()));
  const int n = static_cast<int>(idx.size());
  int cols;
  if (n >= 10) cols = 6;
  else if (n >= 6) cols = 4;
  else return std::nullopt;
  Eigen::MatrixXd A(n, cols);
  Eigen::MatrixXd rhs(n, 2);
  const double scale = tb - ta;
  for (int r = 0; r < n; ++r) {
    const TipSample& p = s[idx[r]];
    A(r, 0) = 1.0;
    A(r, 1) = (p.t - t0) / scale;
    A(r, 2) = std::cos(p.phase);
    A(r, 3) = std::sin(p.phase);
    if (cols == 6) {
      A(r, 4) = std::cos(2.0 * p.phase);
      A(r, 5) = std::sin(2.0 * p.phase);
    }
    rhs(r, 0) = p.x;
    rhs(r, 1) = p.y;
  }
  const Eigen::MatrixXd coef = A.colPivHouseholderQr().solve(rhs);
  return Eigen::Vector2d(coef(0, 0), coef(0, 1));
}

}  // namespace

DriftExtraction extract_drift(const TipTrajectory& raw, const ExtractOptions& options) {
  if (options.settle_rotations < 0) throw std::invalid_argument("extract_drift: settle_rotations must be >= 0");
  std::vector<TipSample> settled;
  if (options.settle_rotations > 0 && !raw.samples.empty()) {
    const double p0 = raw.samples.front().phase;
    for (const auto& x : raw.samples)
      if (std::abs(x.phase - p0) >= kTwoPi * options.settle_rotations) settled.push_back(x);
  }
  const auto& s = options.settle_rotations > 0 ? settled : raw.samples;
  if (s.size() < 2) throw DriftExtractionError("extract_drift: trajectory has fewer than two samples");
  const double turned = s.back().phase - s.front().phase;
  if (std::abs(turned) < kTwoPi * options.min_rotations)
    throw DriftExtractionError("extract_drift: fewer than " + std::to_string(options.min_rotations) +
                               " full rotations");
  const double sense = turned > 0.0 ? 1.0 : -1.0;

  DriftExtraction out;
  // Consecutive full rotations, delimited by 2 pi steps of the phase.
  {
    double ta = s.front().t;
    double pa = s.front().phase;
    std::size_t k = 0;
    while (true) {
      const double pb = pa + sense * kTwoPi;
      while (k + 1 < s.size() && s[k + 1].t <= ta) ++k;
      const auto tb = time_at_phase(s, k, pb, +1, sense);
      if (!tb) break;
      const double tm = 0.5 * (ta + *tb);
      const auto c = window_center(s, ta, *tb, tm);
      if (!c) throw DriftExtractionError("extract_drift: too few tip samples per rotation");
      out.rotations.push_back({tm, *tb - ta, (*c)(0), (*c)(1)});
      ta = *tb;
      pa = pb;
    }
  }
  for (std::size_t k = 1; k < out.rotations.size(); ++k) {
    const double p0 = out.rotations[k - 1].period, p1 = out.rotations[k].period;
    if (std::abs(p1 - p0) > options.max_period_jitter * p0)
      throw DriftExtractionError("extract_drift: rotation period unstable between windows");
  }

  // Sliding one-period windows centred on tip samples.
  const int stride = std::max(1, options.stride);
  for (std::size_t i = 0; i < s.size(); i += stride) {
    const auto ta = time_at_phase(s, i, s[i].phase - sense * std::numbers::pi, -1, sense);
    const auto tb = time_at_phase(s, i, s[i].phase + sense * std::numbers::pi, +1, sense);
    if (!ta || !tb) continue;
    const auto c = window_center(s, *ta, *tb, s[i].t);
    if (!c) throw DriftExtractionError("extract_drift: too few tip samples per rotation");
    out.path.points.push_back({s[i].t, (*c)(0), (*c)(1)});
  }
  out.path.order = 0;
  return out;
}

MobilityFit fit_mobility(const std::vector<DriftPath>& paths, const RicciField& field, const FitOptions& options) {
  const int h = std::max(1, options.half_span);
  std::vector<Eigen::Vector2d> b1, b2, vel;
  for (const auto& p : paths) {
    const auto& pts = p.points;
    for (std::size_t i = h; i + h < pts.size(); ++i) {
      const auto& a = pts[i - h];
      const auto& b = pts[i + h];
      const double dt = b.t - a.t;
      if (!(dt > 0.0)) throw std::invalid_argument("fit_mobility: path times must increase");
      if (!field.contains(pts[i].x, pts[i].y)) continue;
      const CurvatureSample c = field.at(pts[i].x, pts[i].y);
      b1.push_back(-(c.upper * c.grad));
      b2.push_back(-Eigen::Vector2d(-c.grad(1), c.grad(0)) / c.sqrt_g);
      vel.emplace_back((b.x - a.x) / dt, (b.y - a.y) / dt);
    }
  }
  const int m = static_cast<int>(vel.size());
  if (m < 2) throw DegenerateFitError("fit_mobility: fewer than two velocity samples");
  Eigen::MatrixXd A(2 * m, 2);
  Eigen::VectorXd y(2 * m);
  for (int k = 0; k < m; ++k) {
    A.row(2 * k) << b1[k](0), b2[k](0);
    A.row(2 * k + 1) << b1[k](1), b2[k](1);
    y(2 * k) = vel[k](0);
    y(2 * k + 1) = vel[k](1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto sv = svd.singularValues();
  if (!(sv(0) > 0.0))
    throw DegenerateFitError("fit_mobility: grad R vanishes along every path sample; no drift information");
  if (sv(1) < options.rank_tolerance * sv(0))
    throw DegenerateFitError(
        "fit_mobility: design matrix is rank deficient (the gradient and transverse basis fields are parallel "
        "along the paths)");
  const Eigen::Vector2d q = svd.solve(y);
  MobilityFit fit;
  fit.q1 = q(0);
  fit.q2 = q(1);
  const Eigen::VectorXd res = y - A * q;
  fit.residual_norm = res.norm();
  fit.samples = m;
  const int dof = 2 * m - 2;
  const double sigma2 = dof > 0 ? res.squaredNorm() / dof : 0.0;
  fit.covariance = sigma2 * (A.transpose() * A).inverse();
  return fit;
}

double fit_q0(const std::vector<double>& periods, const std::vector<double>& R, double omega0) {
  if (periods.size() != R.size() || periods.empty())
    throw std::invalid_argument("fit_q0: need matching, non-empty period and R sequences");
  double rmin = R.front(), rmax = R.front(), amax = 0.0;
  for (double r : R) {
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    amax = std::max(amax, std::abs(r));
  }
  if (!(amax > 0.0) || rmax - rmin < 0.1 * amax)
    throw DegenerateFitError("fit_q0: R varies by less than 10% of its magnitude along the path");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < R.size(); ++k) {
    if (!(periods[k] > 0.0)) throw std::invalid_argument("fit_q0: periods must be positive");
    num += R[k] * (kTwoPi / periods[k] - omega0);
    den += R[k] * R[k];
  }
  return num / den;
}

}  // namespace spiraldrift
