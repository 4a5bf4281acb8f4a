#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "spiraldrift/config.hpp"
#include "spiraldrift/geometry.hpp"
#include "spiraldrift/solver.hpp"

namespace spiraldrift {

enum class RunStatus { Completed, TrackingLost, ReachedEdge, NonFinite };
std::string to_string(RunStatus s);

/// Planar seed without its state, as recorded in run metadata.
struct SeedSummary {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double period = 0.0;
  double omega0 = 0.0;
  double core_radius = 0.0;
  /// Largest chart distance from the orbit centre to the core circle.
  double chart_core_radius = 0.0;
  int chirality = 0;
  int rotations = 0;
};

struct RunOptions {
  /// Output directory; nothing is written when empty.
  std::filesystem::path out_dir;
  /// Directory holding reusable planar seeds; unused when empty.
  std::filesystem::path seed_cache;
  int threads = 1;
  /// Called after each tip sample with the current time.
  std::function<void(double)> progress;
};

struct ExperimentResult {
  ExperimentConfig config;
  TipTrajectory trajectory;
  RunStatus status = RunStatus::Completed;
  std::string message;
  SeedSummary seed;
  MetricField metric;
  SpiralState final_state;
  double dt = 0.0;
  long steps = 0;
  double wall_seconds = 0.0;
};

/// Seeds the planar spiral for `config` (or loads it from the cache).
PlanarSeed planar_seed_for(const ExperimentConfig& config, const RunOptions& options);
SeedSummary summarize(const PlanarSeed& seed, const SurfaceSpec& planar);

void save_seed(const std::filesystem::path& dir, const PlanarSeed& seed);
PlanarSeed load_seed(const std::filesystem::path& dir);

/// Seeds, places the spiral at config.seed_position and evolves to t_end,
/// sampling the tip every tip_stride. Stops early on tracking loss, on a
/// non-finite state, or when the tip comes within edge_margin core radii of
/// the boundary; the trajectory up to that point is kept.
///
/// With an output directory it writes config.json, metadata.json, tips.csv,
/// ricci.grid, sqrt_g.grid and, if enabled, snapshots/<t>/ directories that
/// `resume_experiment` accepts.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Continues a run from a snapshot directory to the config's t_end.
ExperimentResult resume_experiment(const std::filesystem::path& snapshot, const RunOptions& options = {});

void write_tip_csv(const std::filesystem::path& path, const TipTrajectory& traj);
/// Rebuilds a trajectory from a tip CSV (t, x, y, phase, period_estimate).
TipTrajectory read_tip_csv(const std::filesystem::path& path);

/// Code version baked in at configure time.
std::string code_version();

}  // namespace spiraldrift
