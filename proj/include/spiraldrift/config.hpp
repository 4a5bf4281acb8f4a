#pragma once

// JSON forms of the surface spec, experiment config and mobility coefficients.

#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "spiraldrift/driftlaw.hpp"
#include "spiraldrift/geometry.hpp"
#include "spiraldrift/solver.hpp"

namespace spiraldrift {

using Json = nlohmann::json;

/// {"shape": {"kind": "plane"|"paraboloid"|"tabulated", "A", "sign", "file"},
///  "fiber": {"kind": "constant"|"linear"|"tabulated", "alpha0", "B", "file"},
///  "dL", "dT", "D0", "L", "dx"}
/// Tabulated entries name a grid file, relative paths resolved against `base`.
SurfaceSpec surface_spec_from_json(const Json& j, const std::filesystem::path& base = {});
/// Tabulated fields are written inline as "file" only when `tabulated_dir` is
/// given; otherwise they are rejected.
Json surface_spec_to_json(const SurfaceSpec& spec, const std::filesystem::path& tabulated_dir = {});

/// One simulation run: Table I columns plus run controls.
struct ExperimentConfig {
  std::string name = "custom";
  BarkleyKinetics kinetics;
  /// Paraboloid coefficient (0 selects the plane) and its sign.
  double A = 0.0;
  int shape_sign = -1;
  /// Fiber rotation rate alpha = B (x + y); with B = 0 the fibers are at alpha0.
  double B = 0.0;
  double alpha0 = 0.0;
  double L = 40.0;
  double dx = 0.1;
  double DL = 1.0;
  double DT = 1.0;
  double D0 = 1.0;
  /// Replaces A, B, alpha0, L, dx, DL, DT and D0 when present.
  std::optional<SurfaceSpec> surface;

  double t_end = 0.0;
  Eigen::Vector2d seed_position = Eigen::Vector2d::Zero();
  int chirality = 1;
  double tip_stride = 1.0;
  /// 0 disables snapshots.
  double snapshot_stride = 0.0;
  /// Edge length of the planar seeding domain.
  double seed_L = 40.0;
  /// 0 selects the explicit Euler bound.
  double dt = 0.0;
  /// Runs stop once the tip is this many core radii from the boundary.
  double edge_margin = 2.0;

  SurfaceSpec surface_spec() const;
  void validate() const;
};

ExperimentConfig experiment_config_from_json(const Json& j, const std::filesystem::path& base = {});
Json experiment_config_to_json(const ExperimentConfig& c);

Json coefficients_to_json(const MobilityCoefficients& q);
MobilityCoefficients coefficients_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

/// 64-bit FNV-1a digest, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string file_digest(const std::filesystem::path& path);

}  // namespace spiraldrift
