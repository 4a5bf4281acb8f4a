#include <cmath>
#include <numbers>

#include "spiraldrift/solver.hpp"

namespace spiraldrift {

SurfaceSpec planar_seed_surface(const SurfaceSpec& spec, double L) {
  SurfaceSpec p = spec;
  p.shape = PlaneShape{};
  double alpha = 0.0;
  if (const auto* t = std::get_if<TabulatedFiber>(&spec.fiber)) {
    const int i = static_cast<int>(std::lround(-t->grid.x0 / t->grid.dx));
    const int j = static_cast<int>(std::lround(-t->grid.y0 / t->grid.dx));
    if (!t->grid.contains(i, j)) throw std::invalid_argument("planar_seed_surface: fiber table does not cover the origin");
    alpha = t->alpha(j, i);
  } else {
    alpha = fiber_angle<double>(spec.fiber, 0.0, 0.0);
  }
  p.fiber = ConstantFiber{alpha};
  p.L = L;
  p.validate();
  return p;
}

SpiralState cross_field_state(const GridGeometry& grid, const BarkleyKinetics& kinetics, int chirality,
                              const Eigen::Vector2d& at) {
  if (chirality != 1 && chirality != -1) throw std::invalid_argument("cross_field_state: chirality must be +1 or -1");
  SpiralState s = SpiralState::rest(grid);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (grid.x(i) < at(0)) s.u(j, i) = 1.0;
      const bool below = grid.y(j) < at(1);
      if (below == (chirality < 0)) s.v(j, i) = 0.5 * kinetics.a;
    }
  return s;
}

namespace {

// Time average of the piecewise-linear tip path over [t0, t1].
Eigen::Vector2d orbit_center(const std::vector<TipSample>& s, double t0, double t1) {
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double a = std::max(t0, s[k - 1].t), b = std::min(t1, s[k].t);
    if (b <= a) continue;
    const double h = s[k].t - s[k - 1].t;
    auto at = [&](double t) {
      const double w = (t - s[k - 1].t) / h;
      return Eigen::Vector2d((1 - w) * s[k - 1].x + w * s[k].x, (1 - w) * s[k - 1].y + w * s[k].y);
    };
    acc += 0.5 * (b - a) * (at(a) + at(b));
  }
  return acc / (t1 - t0);
}

}  // namespace

PlanarSeed seed_spiral(const SurfaceSpec& planar, const BarkleyKinetics& kinetics, const SeedOptions& options) {
  planar.validate();
  kinetics.validate();
  const GridGeometry grid = planar.grid();
  const MetricField metric = christoffel_and_ricci(planar, DerivativeMode::Auto);
  const double bound = max_time_step(planar);
  if (options.dt > bound * (1.0 + 1e-12))
    throw std::invalid_argument("seed_spiral: dt exceeds the explicit Euler bound");
  const double dt = options.dt > 0.0 ? options.dt : bound;
  Simulator sim(build_stencil(planar, metric), kinetics, planar.D0, dt, options.threads);
  sim.load(cross_field_state(grid, kinetics, options.chirality));

  const long chunk = std::max(1L, std::lround(options.sample_dt / dt));
  const double max_gap = 50.0;  // time allowed without a trackable tip
  const double max_jump = 1.0;  // tip displacement per sample treated as a restart
  const Mat2<double> g0 = metric.lower_at(grid.nx / 2, grid.ny / 2);

  TipTrajectory traj;
  std::optional<Eigen::Vector2d> prev;
  double last_seen = 0.0;
  std::optional<Eigen::Vector2d> last_center;
  std::size_t crossings_seen = 0;

  while (true) {
    sim.advance(chunk);
    const SpiralState st = sim.state();
    std::optional<TipPoint> tip;
    try {
      tip = track_tip(st, kinetics, prev);
    } catch (const AmbiguousTipError&) {
    }
    if (tip && prev && std::hypot(tip->x - (*prev)(0), tip->y - (*prev)(1)) > max_jump) tip.reset();
    if (!tip) {
      if (!traj.samples.empty()) {
        traj = TipTrajectory{};
        prev.reset();
        last_center.reset();
        crossings_seen = 0;
      }
      if (st.t - last_seen > max_gap) throw SeedingError("seed_spiral: no spiral tip formed");
      // A freshly stimulated medium can show several candidates; retry with
      // the one nearest the stimulus corner.
      try {
        tip = track_tip(st, kinetics, Eigen::Vector2d::Zero());
      } catch (const AmbiguousTipError&) {
      }
      if (!tip) continue;
    }
    last_seen = st.t;
    prev = Eigen::Vector2d(tip->x, tip->y);
    traj.append(st.t, *tip);

    if (traj.crossing_times.size() == crossings_seen) continue;
    crossings_seen = traj.crossing_times.size();
    if (crossings_seen < 2) continue;
    const double t0 = traj.crossing_times[crossings_seen - 2];
    const double t1 = traj.crossing_times[crossings_seen - 1];
    const Eigen::Vector2d c = orbit_center(traj.samples, t0, t1);
    const int rotations = static_cast<int>(crossings_seen) - 1;
    const bool settled = last_center && (c - *last_center).norm() < options.closure_tol;
    last_center = c;
    if (settled && rotations >= options.min_rotations) {
      if (traj.chirality != options.chirality)
        throw SeedingError("seed_spiral: spiral formed with the opposite chirality");
      PlanarSeed seed;
      seed.state = st;
      seed.center = c;
      seed.period = t1 - t0;
      seed.omega0 = 2.0 * std::numbers::pi / seed.period;
      double r = 0.0;
      int n = 0;
      for (const auto& s : traj.samples)
        if (s.t >= t0 && s.t <= t1) {
          const Eigen::Vector2d d(s.x - c(0), s.y - c(1));
          r += std::sqrt(d.dot(g0 * d));
          ++n;
        }
      seed.core_radius = r / n;
      seed.chirality = traj.chirality;
      seed.rotations = rotations;
      return seed;
    }
    if (rotations >= options.max_rotations)
      throw SeedingError("seed_spiral: tip orbit did not close within " + std::to_string(options.max_rotations) +
                         " rotations");
  }
}

SpiralState place_seed(const PlanarSeed& seed, const GridGeometry& target, const Eigen::Vector2d& center) {
  const GridGeometry& src = seed.state.grid;
  if (std::abs(src.dx - target.dx) > 1e-12 * target.dx)
    throw std::invalid_argument("place_seed: planar and target grids need the same spacing");
  // Integer node shift taking the planar orbit centre closest to `center`.
  const long di = std::lround((center(0) - seed.center(0) - (target.x0 - src.x0)) / target.dx);
  const long dj = std::lround((center(1) - seed.center(1) - (target.y0 - src.y0)) / target.dx);
  SpiralState out = SpiralState::rest(target);
  for (int j = 0; j < target.ny; ++j)
    for (int i = 0; i < target.nx; ++i) {
      const long si = i - di, sj = j - dj;
      if (si < 0 || sj < 0 || si >= src.nx || sj >= src.ny) continue;
      out.u(j, i) = seed.state.u(sj, si);
      out.v(j, i) = seed.state.v(sj, si);
    }
  out.t = 0.0;
  return out;
}

}  // namespace spiraldrift
