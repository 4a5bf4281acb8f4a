#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "spiraldrift/driftlaw.hpp"
#include "spiraldrift/solver.hpp"

namespace spiraldrift {

struct DriftExtractionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One rotation-length window of the raw trajectory.
struct RotationWindow {
  double t = 0.0;  // window centre
  double period = 0.0;
  double x = 0.0;  // orbit centre at t
  double y = 0.0;
};

struct DriftExtraction {
  DriftPath path;
  /// Consecutive, non-overlapping windows; their periods feed fit_q0.
  std::vector<RotationWindow> rotations;
};

struct ExtractOptions {
  int min_rotations = 3;
  /// Rotations discarded at the start, while the placed seed relaxes to the
  /// local anisotropy. Not counted towards min_rotations.
  int settle_rotations = 0;
  /// Largest relative period change between consecutive rotations.
  double max_period_jitter = 0.05;
  /// Emit a centre every `stride` tip samples.
  int stride = 1;
};

/// Rotation-averaged centre path. Each window spans one full turn of the
/// unwrapped phase (from -pi to +pi about the sample); inside it the tip
/// coordinates are fitted by a centre moving at constant velocity plus the
/// first two harmonics of the phase, which reproduces the centre exactly for
/// a uniformly drifting circular orbit.
DriftExtraction extract_drift(const TipTrajectory& raw, const ExtractOptions& options = {});

struct MobilityFit {
  double q1 = 0.0;
  double q2 = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double residual_norm = 0.0;
  int samples = 0;
};

struct FitOptions {
  /// Velocities are central differences over +-`half_span` path samples.
  int half_span = 1;
  /// Relative singular-value threshold of the design matrix.
  double rank_tolerance = 1e-10;
};

struct DegenerateFitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Least-squares fit of centre velocities against the basis fields
/// -g^AB d_B R and -g^(-1/2) eps^BA d_B R.
MobilityFit fit_mobility(const std::vector<DriftPath>& paths, const RicciField& field, const FitOptions& options = {});

/// Slope of omega = 2 pi / period against R with the intercept pinned to omega0.
double fit_q0(const std::vector<double>& periods, const std::vector<double>& R, double omega0);

}  // namespace spiraldrift
