#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spiraldrift/config.hpp"
#include "spiraldrift/driftlaw.hpp"
#include "spiraldrift/experiment.hpp"
#include "spiraldrift/mobility.hpp"

namespace spiraldrift {

/// Declared outcomes checked by run_pipeline. Unset fields are not checked.
struct Expectations {
  /// +1: the centre moves away from the origin, -1: towards it.
  std::optional<int> radial_drift;
  /// true: the centre ends at lower R than it started.
  std::optional<bool> toward_lower_ricci;
  std::optional<int> q1_sign;
  std::optional<int> q2_sign;
  /// |q1| / |q2| must stay below this.
  std::optional<double> max_q1_q2_ratio;
  /// Reference (q1, q2) for counterclockwise rotation, with a relative
  /// tolerance per component; signs must match.
  std::optional<Eigen::Vector2d> reference_q;
  double reference_rel_tol = 0.25;
  /// Mean observed-vs-predicted deviation in core radii.
  std::optional<double> max_mean_deviation;
  /// Least drift arc length, in core diameters, for the deviation check.
  double min_drift_core_diameters = 5.0;

  bool empty() const;
};

struct ExperimentManifest {
  std::string name;
  ExperimentConfig experiment;
  Expectations expectations;
  ExtractOptions extract;
  FitOptions fit;
};

ExperimentManifest manifest_from_json(const Json& j, const std::filesystem::path& base = {});
Json manifest_to_json(const ExperimentManifest& m);
ExperimentManifest load_manifest(const std::filesystem::path& path);

/// Table I setups: fig3, fig4a, fig4b, fig5a_red, fig5a_yellow, fig5b_red,
/// fig5b_yellow. Desk variants carry the suffix "_desk" and a shorter t_end.
std::vector<std::string> canonical_manifest_names();
ExperimentManifest canonical_manifest(const std::string& name);

struct DeviationReport {
  double max = 0.0;
  double mean = 0.0;
  double rms = 0.0;
  /// Distance between the final observed point and the predicted point at
  /// the same time.
  double terminal = 0.0;
  double observed_arc_length = 0.0;
  int samples = 0;
};

/// Lower metric g_AB at a chart point.
using MetricAt = std::function<Eigen::Matrix2d(double x, double y)>;

/// Deviation of each observed point from the nearest point on the predicted
/// polyline, over the common time range. Lengths are Euclidean in the chart,
/// or measured with g_AB at the observed point when `metric` is given.
DeviationReport compare_trajectories(const DriftPath& observed, const DriftPath& predicted,
                                     const MetricAt& metric = {});

struct ExpectationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct PipelineResult {
  ExperimentManifest manifest;
  std::vector<ExpectationCheck> stages;
  std::optional<ExperimentResult> run;
  std::optional<DriftExtraction> drift;
  std::optional<MobilityFit> fit;
  std::optional<double> q0;
  std::optional<MobilityCoefficients> fitted;
  std::optional<DriftPath> prediction;
  std::optional<DeviationReport> deviation;
  std::vector<ExpectationCheck> checks;

  bool stages_ok() const;
  bool expectations_ok() const;
};

/// seed -> simulate -> extract_drift -> fit_mobility -> integrate_drift with
/// the fitted coefficients -> compare. Writes, under `bundle`:
///   geometry/ (ricci, sqrt_g, ricci_shape, ricci_aniso as .grid and .csv),
///   run/ (see run_experiment), drift.csv, prediction.csv, fit.json and
///   summary.json.
/// A failing stage is recorded and the later stages are skipped.
PipelineResult run_pipeline(const ExperimentManifest& manifest, const std::filesystem::path& bundle,
                            const RunOptions& options = {});

/// Fit report: estimates, covariance, residual norm and input digest.
Json fit_report(const MobilityFit& fit, const std::optional<double>& q0, const MobilityCoefficients& q,
                const std::string& input_digest);

void write_drift_csv(const std::filesystem::path& path, const DriftPath& path_points);
DriftPath read_drift_csv(const std::filesystem::path& path);

}  // namespace spiraldrift
