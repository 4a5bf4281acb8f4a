#include <algorithm>
#include <cmath>
#include <numbers>

#include "spiraldrift/solver.hpp"

namespace spiraldrift {

namespace {

struct Candidate {
  double x, y, angle;
};

// Real roots of c0 + c1 t + c2 t^2 in [0, 1] (with a small tolerance).
int unit_roots(double c0, double c1, double c2, double out[2]) {
  constexpr double tol = 1e-12;
  const double scale = std::max({std::abs(c0), std::abs(c1), std::abs(c2)});
  if (scale == 0.0) return 0;
  int n = 0;
  auto keep = [&](double t) {
    if (t >= -tol && t <= 1.0 + tol) out[n++] = std::clamp(t, 0.0, 1.0);
  };
  if (std::abs(c2) <= 1e-14 * scale) {
    if (std::abs(c1) > 1e-14 * scale) keep(-c0 / c1);
    return n;
  }
  const double disc = c1 * c1 - 4.0 * c2 * c0;
  if (disc < 0.0) return 0;
  const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
  keep(q / c2);
  if (q != 0.0) {
    const double t2 = c0 / q;
    if (n == 0 || std::abs(t2 - out[0]) > tol) keep(t2);
  }
  return n;
}

void cell_candidates(const SpiralState& st, double vt, int i, int j, std::vector<Candidate>& out) {
  const double f00 = st.u(j, i) - 0.5, f10 = st.u(j, i + 1) - 0.5;
  const double f01 = st.u(j + 1, i) - 0.5, f11 = st.u(j + 1, i + 1) - 0.5;
  const double g00 = st.v(j, i) - vt, g10 = st.v(j, i + 1) - vt;
  const double g01 = st.v(j + 1, i) - vt, g11 = st.v(j + 1, i + 1) - vt;
  auto straddles = [](double p, double q, double r, double s) {
    const double lo = std::min({p, q, r, s}), hi = std::max({p, q, r, s});
    return lo <= 0.0 && hi >= 0.0;
  };
  if (!straddles(f00, f10, f01, f11) || !straddles(g00, g10, g01, g11)) return;

  // F = A(t) + B(t) s, G = C(t) + D(t) s on the unit cell.
  const double a0 = f00, a1 = f01 - f00, b0 = f10 - f00, b1 = f11 - f10 - f01 + f00;
  const double c0 = g00, c1 = g01 - g00, d0 = g10 - g00, d1 = g11 - g10 - g01 + g00;
  double roots[2];
  const int nr = unit_roots(a0 * d0 - b0 * c0, a0 * d1 + a1 * d0 - b0 * c1 - b1 * c0, a1 * d1 - b1 * c1, roots);
  for (int k = 0; k < nr; ++k) {
    const double t = roots[k];
    const double A = a0 + a1 * t, B = b0 + b1 * t, C = c0 + c1 * t, D = d0 + d1 * t;
    double s;
    if (std::abs(B) >= std::abs(D) && B != 0.0) s = -A / B;
    else if (D != 0.0) s = -C / D;
    else continue;
    if (s < -1e-12 || s > 1.0 + 1e-12) continue;
    s = std::clamp(s, 0.0, 1.0);
    const double us = (st.u(j, i + 1) - st.u(j, i)) * (1.0 - t) + (st.u(j + 1, i + 1) - st.u(j + 1, i)) * t;
    const double ut = (st.u(j + 1, i) - st.u(j, i)) * (1.0 - s) + (st.u(j + 1, i + 1) - st.u(j, i + 1)) * s;
    out.push_back({st.grid.x(i) + s * st.grid.dx, st.grid.y(j) + t * st.grid.dx, std::atan2(ut, us)});
  }
}

}  // namespace

std::optional<TipPoint> track_tip(const SpiralState& state, const BarkleyKinetics& kinetics,
                                  const std::optional<Eigen::Vector2d>& previous) {
  const double vt = kinetics.tip_v();
  std::vector<Candidate> raw;
  for (int j = 0; j + 1 < state.grid.ny; ++j)
    for (int i = 0; i + 1 < state.grid.nx; ++i) cell_candidates(state, vt, i, j, raw);
  if (raw.empty()) return std::nullopt;

  // Greedy clustering: candidates within two cells of a cluster's first
  // member join it.
  const double merge = 2.0 * state.grid.dx;
  std::vector<std::vector<Candidate>> clusters;
  for (const auto& c : raw) {
    bool placed = false;
    for (auto& cl : clusters)
      if (std::hypot(c.x - cl.front().x, c.y - cl.front().y) <= merge) {
        cl.push_back(c);
        placed = true;
        break;
      }
    if (!placed) clusters.push_back({c});
  }
  std::vector<TipPoint> tips;
  for (const auto& cl : clusters) {
    TipPoint p;
    double sx = 0.0, sy = 0.0, cs = 0.0, sn = 0.0;
    for (const auto& c : cl) {
      sx += c.x;
      sy += c.y;
      cs += std::cos(c.angle);
      sn += std::sin(c.angle);
    }
    p.x = sx / static_cast<double>(cl.size());
    p.y = sy / static_cast<double>(cl.size());
    p.angle = std::atan2(sn, cs);
    tips.push_back(p);
  }
  if (tips.size() == 1) return tips.front();
  if (!previous)
    throw AmbiguousTipError("track_tip: " + std::to_string(tips.size()) +
                            " tip candidates and no previous tip to disambiguate");
  auto dist = [&](const TipPoint& p) { return std::hypot(p.x - (*previous)(0), p.y - (*previous)(1)); };
  return *std::min_element(tips.begin(), tips.end(),
                           [&](const TipPoint& a, const TipPoint& b) { return dist(a) < dist(b); });
}

void TipTrajectory::append(double t, const TipPoint& tip) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  TipSample s{t, tip.x, tip.y, tip.angle, std::nan("")};
  if (samples.empty()) {
    samples.push_back(s);
    return;
  }
  const TipSample& prev = samples.back();
  if (!(t > prev.t)) throw std::invalid_argument("TipTrajectory: timestamps must increase");
  const double d = std::remainder(tip.angle - prev.phase, two_pi);
  s.phase = prev.phase + d;
  const double p0 = samples.front().phase;
  const double k_prev = std::floor((prev.phase - p0) / two_pi);
  const double k_new = std::floor((s.phase - p0) / two_pi);
  if (k_new != k_prev) {
    const double level = p0 + two_pi * std::max(k_prev, k_new);
    const double w = (level - prev.phase) / (s.phase - prev.phase);
    const double tc = prev.t + w * (t - prev.t);
    if (!crossing_times.empty()) periods.push_back(tc - crossing_times.back());
    crossing_times.push_back(tc);
  }
  s.period = periods.empty() ? std::nan("") : periods.back();
  const double total = s.phase - p0;
  if (std::abs(total) > std::numbers::pi) chirality = total > 0.0 ? 1 : -1;
  samples.push_back(s);
}

}  // namespace spiraldrift
