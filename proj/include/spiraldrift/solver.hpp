#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spiraldrift/geometry.hpp"
#include "spiraldrift/grid.hpp"

namespace spiraldrift {

/// Barkley kinetics f = u(1-u)(u - (v+b)/a)/eps, g = u - v, with diffusion
/// weights D_u, D_v (diagonal of P_hat / D0).
struct BarkleyKinetics {
  double a = 0.7;
  double b = 0.19;
  double eps = 0.025;
  double Du = 1.0;
  double Dv = 1.0;
  /// When false the reaction terms are dropped (pure diffusion).
  bool reaction = true;

  double f(double u, double v) const { return u * (1.0 - u) * (u - (v + b) / a) / eps; }
  double g(double u, double v) const { return u - v; }
  /// v level of the tip criterion: the f-nullcline crossing at u = 1/2.
  double tip_v() const { return 0.5 * a - b; }
  void validate() const;
};

struct SpiralState {
  GridGeometry grid;
  Field u;
  Field v;
  double t = 0.0;

  static SpiralState rest(const GridGeometry& grid) { return {grid, grid.zeros(), grid.zeros(), 0.0}; }
};

/// Nine-point coefficients C_{m,n} (m along x, n along y) of
/// (1/sqrt g) d_A(sqrt g g^AB d_B w) ~ (1/(dx^2 sqrt g)) sum C_{m,n} w(x+m dx, y+n dx).
struct StencilTable {
  GridGeometry grid;
  /// Index 3*(m+1) + (n+1).
  std::array<Field, 9> C;
  Field inv_sqrt_g;

  static constexpr int index(int m, int n) { return 3 * (m + 1) + (n + 1); }
  const Field& coeff(int m, int n) const { return C[index(m, n)]; }
};

/// Half-node h^AB = sqrt(g) g^AB from the mean of the two adjacent nodes.
StencilTable build_stencil(const MetricField& metric);
/// Half-node h^AB evaluated from closed-form geometry when the spec has it,
/// otherwise by node averaging.
StencilTable build_stencil(const SurfaceSpec& spec, const MetricField& metric);

/// The explicit Euler bound 0.9 dx^2 / (4 max(D_L, D_T)).
double max_time_step(const SurfaceSpec& spec);

struct NonFiniteStateError : std::runtime_error {
  NonFiniteStateError(int i, int j, double t, const std::string& field);
  int i;
  int j;
  double t;
};

/// Double-buffered explicit Euler integrator. Rows are updated in parallel;
/// each cell sums its nine stencil terms in a fixed order so the result does
/// not depend on the worker count.
class Simulator {
 public:
  Simulator(StencilTable stencil, BarkleyKinetics kinetics, double D0, double dt, int threads = 1);

  void load(const SpiralState& state);
  SpiralState state() const;
  /// Advances by `steps` time steps. Throws NonFiniteStateError on NaN/Inf.
  void advance(long steps);

  double time() const { return t_; }
  long step_count() const { return steps_; }
  double dt() const { return dt_; }
  const StencilTable& stencil() const { return stencil_; }
  const BarkleyKinetics& kinetics() const { return kin_; }

  /// Stencil response (1/(dx^2 sqrt g)) sum C w for a field on the grid.
  Field laplacian(const Field& w) const;

 private:
  void report_non_finite() const;

  StencilTable stencil_;
  BarkleyKinetics kin_;
  double D0_;
  double dt_;
  int threads_;
  int nx_, ny_, stride_;
  std::vector<double> u_, v_, u_next_, v_next_;  // padded by one ghost layer
  double t_ = 0.0;
  long steps_ = 0;
};

/// One explicit Euler step.
SpiralState step(const SpiralState& state, const StencilTable& stencil, const BarkleyKinetics& kinetics, double dt,
                 double D0 = 1.0);

// ---------------------------------------------------------------------------
// Tip tracking

struct TipPoint {
  double x = 0.0;
  double y = 0.0;
  /// Direction of grad u at the tip, in (-pi, pi].
  double angle = 0.0;
};

struct AmbiguousTipError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Intersection of u = 1/2 with v = a/2 - b using bilinear interpolation in
/// each cell. Candidates closer than two cells are merged. With several
/// candidates the one nearest `previous` wins; without `previous` that is an
/// AmbiguousTipError.
std::optional<TipPoint> track_tip(const SpiralState& state, const BarkleyKinetics& kinetics,
                                  const std::optional<Eigen::Vector2d>& previous = std::nullopt);

struct TipSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  /// Unwrapped tip phase; increasing for counterclockwise rotation.
  double phase = 0.0;
  /// Most recent full-rotation period, NaN before the first rotation.
  double period = std::nan("");
};

struct TipTrajectory {
  std::vector<TipSample> samples;
  /// Completed-rotation periods in time order.
  std::vector<double> periods;
  /// Times at which the unwrapped phase passed a multiple of 2 pi relative to
  /// the first sample.
  std::vector<double> crossing_times;
  /// +1 counterclockwise, -1 clockwise, 0 unknown.
  int chirality = 0;

  /// Appends a tip observation, unwrapping the phase and updating periods.
  /// Throws std::invalid_argument if t does not increase.
  void append(double t, const TipPoint& tip);
};

// ---------------------------------------------------------------------------
// Spiral seeding

struct SeedOptions {
  double L = 40.0;             // planar domain edge length
  double sample_dt = 0.1;      // tip sampling interval
  int min_rotations = 4;
  int max_rotations = 60;
  double closure_tol = 1e-2;   // orbit-centre displacement per rotation
  int chirality = +1;          // +1 counterclockwise, -1 clockwise
  double dt = 0.0;             // 0 selects the explicit Euler bound
  int threads = 1;
};

struct PlanarSeed {
  SpiralState state;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double period = 0.0;
  double omega0 = 0.0;
  /// Mean tip distance from the centre measured in the planar metric.
  double core_radius = 0.0;
  int chirality = 0;
  int rotations = 0;
};

struct SeedingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Planar surface with the constant metric of `spec` at the origin.
SurfaceSpec planar_seed_surface(const SurfaceSpec& spec, double L);

/// Cross-field stimulation on the planar surface, evolved until the tip orbit
/// closes. Throws SeedingError if it never does.
PlanarSeed seed_spiral(const SurfaceSpec& planar, const BarkleyKinetics& kinetics, const SeedOptions& options);

/// Copies the planar solution onto `target`, translated so the orbit centre
/// lands on the node nearest `center`. Uncovered nodes are at rest.
SpiralState place_seed(const PlanarSeed& seed, const GridGeometry& target, const Eigen::Vector2d& center);

/// Cross-field initial condition: u = 1 for x < x_c and v = a/2 in the
/// half-plane below (clockwise) or above (counterclockwise) y_c.
SpiralState cross_field_state(const GridGeometry& grid, const BarkleyKinetics& kinetics, int chirality,
                              const Eigen::Vector2d& at = Eigen::Vector2d::Zero());

}  // namespace spiraldrift
