#include "spiraldrift/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace spiraldrift {

namespace fs = std::filesystem;

bool Expectations::empty() const {
  return !radial_drift && !toward_lower_ricci && !q1_sign && !q2_sign && !max_q1_q2_ratio && !reference_q &&
         !max_mean_deviation;
}

// ---------------------------------------------------------------------------
// Manifests

namespace {

Json expectations_to_json(const Expectations& e) {
  Json j = Json::object();
  if (e.radial_drift) j["radial_drift"] = *e.radial_drift > 0 ? "outward" : "inward";
  if (e.toward_lower_ricci) j["toward_lower_ricci"] = *e.toward_lower_ricci;
  if (e.q1_sign) j["q1_sign"] = *e.q1_sign;
  if (e.q2_sign) j["q2_sign"] = *e.q2_sign;
  if (e.max_q1_q2_ratio) j["max_q1_q2_ratio"] = *e.max_q1_q2_ratio;
  if (e.reference_q) {
    j["reference_q"] = {(*e.reference_q)(0), (*e.reference_q)(1)};
    j["reference_rel_tol"] = e.reference_rel_tol;
  }
  if (e.max_mean_deviation) {
    j["max_mean_deviation"] = *e.max_mean_deviation;
    j["min_drift_core_diameters"] = e.min_drift_core_diameters;
  }
  return j;
}

int sign_from_json(const Json& j, const char* key) {
  const int s = j.at(key).get<int>();
  if (s != 1 && s != -1) throw std::invalid_argument(std::string("manifest: ") + key + " must be +1 or -1");
  return s;
}

Expectations expectations_from_json(const Json& j) {
  static const char* known[] = {"radial_drift",    "toward_lower_ricci", "q1_sign",
                                "q2_sign",         "max_q1_q2_ratio",    "reference_q",
                                "reference_rel_tol", "max_mean_deviation", "min_drift_core_diameters"};
  if (!j.is_object()) throw std::invalid_argument("manifest: expectations must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("manifest: unknown expectation '" + key + "'");
  }
  Expectations e;
  try {
    if (j.contains("radial_drift")) {
      const auto s = j.at("radial_drift").get<std::string>();
      if (s != "outward" && s != "inward")
        throw std::invalid_argument("manifest: radial_drift must be 'outward' or 'inward'");
      e.radial_drift = s == "outward" ? 1 : -1;
    }
    if (j.contains("toward_lower_ricci")) e.toward_lower_ricci = j.at("toward_lower_ricci").get<bool>();
    if (j.contains("q1_sign")) e.q1_sign = sign_from_json(j, "q1_sign");
    if (j.contains("q2_sign")) e.q2_sign = sign_from_json(j, "q2_sign");
    if (j.contains("max_q1_q2_ratio")) e.max_q1_q2_ratio = j.at("max_q1_q2_ratio").get<double>();
    if (j.contains("reference_q")) {
      const auto q = j.at("reference_q").get<std::vector<double>>();
      if (q.size() != 2) throw std::invalid_argument("manifest: reference_q needs two values");
      e.reference_q = Eigen::Vector2d(q[0], q[1]);
    }
    if (j.contains("reference_rel_tol")) e.reference_rel_tol = j.at("reference_rel_tol").get<double>();
    if (j.contains("max_mean_deviation")) e.max_mean_deviation = j.at("max_mean_deviation").get<double>();
    if (j.contains("min_drift_core_diameters"))
      e.min_drift_core_diameters = j.at("min_drift_core_diameters").get<double>();
  } catch (const Json::exception& ex) {
    throw std::invalid_argument(std::string("manifest: malformed expectations: ") + ex.what());
  }
  if (e.max_q1_q2_ratio && !(*e.max_q1_q2_ratio > 0.0))
    throw std::invalid_argument("manifest: max_q1_q2_ratio must be positive");
  if (!(e.reference_rel_tol > 0.0)) throw std::invalid_argument("manifest: reference_rel_tol must be positive");
  if (e.max_mean_deviation && !(*e.max_mean_deviation > 0.0))
    throw std::invalid_argument("manifest: max_mean_deviation must be positive");
  return e;
}

}  // namespace

ExperimentManifest manifest_from_json(const Json& j, const fs::path& base) {
  if (!j.is_object()) throw std::invalid_argument("manifest: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "name" && key != "experiment" && key != "expectations" && key != "extract" && key != "fit")
      throw std::invalid_argument("manifest: unknown key '" + key + "'");
  ExperimentManifest m;
  if (!j.contains("experiment")) throw std::invalid_argument("manifest: missing 'experiment'");
  const Json& ex = j.at("experiment");
  if (ex.is_string()) {
    fs::path p = ex.get<std::string>();
    if (p.is_relative()) p = base / p;
    m.experiment = experiment_config_from_json(read_json_file(p), p.parent_path());
  } else {
    m.experiment = experiment_config_from_json(ex, base);
  }
  m.name = j.value("name", m.experiment.name);
  if (j.contains("expectations")) m.expectations = expectations_from_json(j.at("expectations"));
  if (j.contains("extract")) {
    const Json& e = j.at("extract");
    m.extract.min_rotations = e.value("min_rotations", m.extract.min_rotations);
    m.extract.settle_rotations = e.value("settle_rotations", m.extract.settle_rotations);
    m.extract.max_period_jitter = e.value("max_period_jitter", m.extract.max_period_jitter);
    m.extract.stride = e.value("stride", m.extract.stride);
  }
  if (j.contains("fit")) {
    const Json& f = j.at("fit");
    m.fit.half_span = f.value("half_span", m.fit.half_span);
    m.fit.rank_tolerance = f.value("rank_tolerance", m.fit.rank_tolerance);
  }
  return m;
}

Json manifest_to_json(const ExperimentManifest& m) {
  return {{"name", m.name},
          {"experiment", experiment_config_to_json(m.experiment)},
          {"expectations", expectations_to_json(m.expectations)},
          {"extract",
           {{"min_rotations", m.extract.min_rotations},
            {"settle_rotations", m.extract.settle_rotations},
            {"max_period_jitter", m.extract.max_period_jitter},
            {"stride", m.extract.stride}}},
          {"fit", {{"half_span", m.fit.half_span}, {"rank_tolerance", m.fit.rank_tolerance}}}};
}

ExperimentManifest load_manifest(const fs::path& path) {
  return manifest_from_json(read_json_file(path), path.parent_path());
}

std::vector<std::string> canonical_manifest_names() {
  std::vector<std::string> out;
  for (const char* n : {"fig3", "fig4a", "fig4b", "fig5a_red", "fig5a_yellow", "fig5b_red", "fig5b_yellow",
                        "fig5a_red_shallow", "fig5a_yellow_shallow"}) {
    out.emplace_back(n);
    out.push_back(std::string(n) + "_desk");
  }
  return out;
}

ExperimentManifest canonical_manifest(const std::string& requested) {
  constexpr double pi = std::numbers::pi;
  std::string name = requested;
  const bool desk = name.size() > 5 && name.ends_with("_desk");
  if (desk) name.resize(name.size() - 5);
  // The _shallow variants of fig5a use A = 0.05 instead of 0.5.
  const bool shallow = name.starts_with("fig5a_") && name.ends_with("_shallow");
  if (shallow) name.resize(name.size() - 8);

  ExperimentManifest m;
  m.name = requested;
  ExperimentConfig& c = m.experiment;
  c.name = requested;
  c.kinetics.b = 0.19;
  c.kinetics.eps = 0.025;
  c.kinetics.Du = 1.0;
  c.D0 = 1.0;
  c.DT = 1.0;
  c.dx = 0.1;
  c.tip_stride = 0.1;
  c.chirality = 1;
  Expectations& e = m.expectations;
  double t_desk = 0.0, t_full = 0.0;

  if (name == "fig3") {
    c.kinetics.a = 0.7;
    c.kinetics.Dv = 1.0;
    c.A = 0.1;
    c.shape_sign = 1;
    c.L = 40.0;
    c.DL = 1.0;
    c.seed_position = {3.0, 0.0};
    t_desk = 400.0;
    t_full = 2000.0;
    e.radial_drift = 1;
    e.q1_sign = 1;
  } else if (name == "fig4a" || name == "fig4b") {
    const bool a13 = name == "fig4a";
    c.kinetics.a = a13 ? 1.3 : 1.1;
    c.kinetics.Dv = 0.0;
    c.B = pi / 40.0;
    c.L = 30.0;
    c.DL = 4.0;
    c.seed_position = {0.0, 0.0};
    t_desk = a13 ? 300.0 : 200.0;
    t_full = 1500.0;
    if (a13) {
      e.toward_lower_ricci = true;
      e.q1_sign = 1;
      e.q2_sign = 1;
      e.reference_q = Eigen::Vector2d(0.643, 0.357);
      e.max_mean_deviation = 1.0;
    } else {
      e.q1_sign = -1;
      e.q2_sign = 1;
      e.max_q1_q2_ratio = 0.2;
      e.reference_q = Eigen::Vector2d(-0.102, 2.652);
    }
  } else if (name == "fig5a_red" || name == "fig5a_yellow") {
    const bool red = name == "fig5a_red";
    c.kinetics.a = 1.3;
    c.kinetics.Dv = 0.0;
    c.A = shallow ? 0.05 : 0.5;
    c.B = red ? pi / 40.0 : 0.0;
    c.L = 40.0;
    c.DL = red ? 4.0 : 1.0;
    c.seed_position = {2.0, 2.0};
    t_desk = 200.0;
    t_full = 1000.0;
    e.q1_sign = 1;
    e.max_mean_deviation = 1.0;
  } else if (name == "fig5b_red" || name == "fig5b_yellow") {
    const bool red = name == "fig5b_red";
    c.kinetics.a = 1.1;
    c.kinetics.Dv = 0.0;
    c.A = 0.025;
    c.B = red ? pi / 80.0 : 0.0;
    c.L = 80.0;
    c.DL = red ? 4.0 : 1.0;
    c.seed_position = {10.0, 10.0};
    t_desk = 200.0;
    t_full = 1500.0;
    e.q1_sign = -1;
  } else {
    throw std::invalid_argument("unknown canonical manifest '" + requested + "'");
  }
  c.t_end = desk ? t_desk : t_full;
  c.snapshot_stride = desk ? 0.0 : 250.0;
  m.extract.settle_rotations = 4;
  c.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Trajectory comparison

namespace {

Eigen::Vector2d at_time(const std::vector<DriftPoint>& p, double t) {
  if (t <= p.front().t) return {p.front().x, p.front().y};
  if (t >= p.back().t) return {p.back().x, p.back().y};
  const auto it = std::lower_bound(p.begin(), p.end(), t, [](const DriftPoint& a, double v) { return a.t < v; });
  const DriftPoint& b = *it;
  const DriftPoint& a = *(it - 1);
  const double w = (t - a.t) / (b.t - a.t);
  return {a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)};
}

// Distance in the norm |v|^2 = v^T G v.
double distance_to_polyline(const std::vector<DriftPoint>& p, const Eigen::Vector2d& q, const Eigen::Matrix2d& G) {
  auto norm = [&](const Eigen::Vector2d& v) { return std::sqrt(v.dot(G * v)); };
  if (p.size() == 1) return norm(q - Eigen::Vector2d(p[0].x, p[0].y));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < p.size(); ++k) {
    const Eigen::Vector2d a(p[k - 1].x, p[k - 1].y), b(p[k].x, p[k].y);
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.dot(G * ab);
    const double s = len2 > 0.0 ? std::clamp((q - a).dot(G * ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, norm(q - (a + s * ab)));
  }
  return best;
}

}  // namespace

DeviationReport compare_trajectories(const DriftPath& observed, const DriftPath& predicted, const MetricAt& metric) {
  const auto& o = observed.points;
  const auto& p = predicted.points;
  if (o.empty() || p.empty()) throw std::invalid_argument("compare_trajectories: empty path");
  const double t0 = std::max(o.front().t, p.front().t);
  const double t1 = std::min(o.back().t, p.back().t);
  if (t1 < t0) throw std::invalid_argument("compare_trajectories: paths do not overlap in time");
  auto G = [&](double x, double y) -> Eigen::Matrix2d { return metric ? metric(x, y) : Eigen::Matrix2d::Identity(); };
  auto length = [&](const Eigen::Vector2d& v, const Eigen::Matrix2d& g) { return std::sqrt(v.dot(g * v)); };
  DeviationReport r;
  double sum = 0.0, sum2 = 0.0;
  const DriftPoint* last = nullptr;
  for (const auto& pt : o) {
    if (pt.t < t0 || pt.t > t1) continue;
    const Eigen::Vector2d q(pt.x, pt.y);
    const double d = distance_to_polyline(p, q, G(pt.x, pt.y));
    r.max = std::max(r.max, d);
    sum += d;
    sum2 += d * d;
    ++r.samples;
    if (last) {
      const Eigen::Vector2d step = q - Eigen::Vector2d(last->x, last->y);
      r.observed_arc_length += length(step, G(0.5 * (pt.x + last->x), 0.5 * (pt.y + last->y)));
    }
    last = &pt;
  }
  if (r.samples == 0) throw std::invalid_argument("compare_trajectories: no observed samples in the common range");
  r.mean = sum / r.samples;
  r.rms = std::sqrt(sum2 / r.samples);
  r.terminal = length(Eigen::Vector2d(last->x, last->y) - at_time(p, last->t), G(last->x, last->y));
  return r;
}

// ---------------------------------------------------------------------------
// Pipeline

bool PipelineResult::stages_ok() const {
  for (const auto& s : stages)
    if (!s.passed) return false;
  return true;
}

bool PipelineResult::expectations_ok() const {
  if (!stages_ok()) return false;
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

void write_drift_csv(const fs::path& path, const DriftPath& dp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,x,y\n";
  char buf[96];
  for (const auto& p : dp.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.t, p.x, p.y);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

DriftPath read_drift_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,x,y", 0) != 0) throw std::runtime_error(path.string() + ": not a drift CSV");
  DriftPath dp;
  dp.order = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v[3];
    const char* s = line.c_str();
    for (double& x : v) {
      char* end = nullptr;
      x = std::strtod(s, &end);
      if (end == s) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
      s = *end == ',' ? end + 1 : end;
    }
    dp.points.push_back({v[0], v[1], v[2]});
  }
  return dp;
}

Json fit_report(const MobilityFit& fit, const std::optional<double>& q0, const MobilityCoefficients& q,
                const std::string& input_digest) {
  Json j;
  j["q1"] = fit.q1;
  j["q2"] = fit.q2;
  j["q0"] = q0 ? Json(*q0) : Json(nullptr);
  j["omega0"] = q.omega0;
  j["chirality"] = q.chirality;
  const MobilityCoefficients ccw = q.for_chirality(1);
  j["counterclockwise"] = {{"q1", ccw.q1}, {"q2", ccw.q2}};
  j["covariance"] = {{fit.covariance(0, 0), fit.covariance(0, 1)}, {fit.covariance(1, 0), fit.covariance(1, 1)}};
  j["stderr"] = {std::sqrt(fit.covariance(0, 0)), std::sqrt(fit.covariance(1, 1))};
  j["residual_norm"] = fit.residual_norm;
  j["samples"] = fit.samples;
  j["input_digest"] = input_digest;
  return j;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_geometry(const fs::path& dir, const SurfaceSpec& spec, const MetricField& metric) {
  fs::create_directories(dir);
  const RicciDecomposition dec = ricci_decomposition(spec);
  const std::pair<const char*, const Field*> fields[] = {
      {"ricci", &metric.ricci}, {"sqrt_g", &metric.sqrt_g}, {"ricci_shape", &dec.shape}, {"ricci_aniso", &dec.aniso}};
  for (const auto& [name, f] : fields) {
    write_grid(dir / (std::string(name) + ".grid"), metric.grid, name, *f);
    write_grid_csv(dir / (std::string(name) + ".csv"), metric.grid, name, *f);
  }
}

void check_expectations(PipelineResult& r, const RicciField& field) {
  const Expectations& e = r.manifest.expectations;
  auto add = [&](std::string name, bool ok, std::string detail) {
    r.checks.push_back({std::move(name), ok, std::move(detail)});
  };
  if (e.empty()) return;
  if (!r.drift || r.drift->path.points.size() < 2) {
    add("drift_path", false, "no drift path to check");
    return;
  }
  const auto& pts = r.drift->path.points;
  const Eigen::Vector2d p0(pts.front().x, pts.front().y), p1(pts.back().x, pts.back().y);
  if (e.radial_drift) {
    const double dr = p1.norm() - p0.norm();
    int up = 0;
    for (std::size_t k = 1; k < pts.size(); ++k)
      if (std::hypot(pts[k].x, pts[k].y) >= std::hypot(pts[k - 1].x, pts[k - 1].y)) ++up;
    const double frac = static_cast<double>(up) / static_cast<double>(pts.size() - 1);
    add("radial_drift", dr * *e.radial_drift > 0.0,
        "centre radius " + fmt(p0.norm()) + " -> " + fmt(p1.norm()) + ", outward fraction " + fmt(frac));
  }
  if (e.toward_lower_ricci) {
    const double R0 = field.at(p0(0), p0(1)).R, R1 = field.at(p1(0), p1(1)).R;
    add("toward_lower_ricci", (R1 < R0) == *e.toward_lower_ricci, "R " + fmt(R0) + " -> " + fmt(R1));
  }
  if (!r.fitted) {
    if (e.q1_sign || e.q2_sign || e.max_q1_q2_ratio || e.reference_q) add("fit", false, "no fitted coefficients");
  } else {
    const MobilityCoefficients ccw = r.fitted->for_chirality(1);
    if (e.q1_sign) add("q1_sign", ccw.q1 * *e.q1_sign > 0.0, "q1 = " + fmt(ccw.q1));
    if (e.q2_sign) add("q2_sign", ccw.q2 * *e.q2_sign > 0.0, "q2 = " + fmt(ccw.q2) + " (counterclockwise)");
    if (e.max_q1_q2_ratio) {
      const double ratio = std::abs(ccw.q1) / std::abs(ccw.q2);
      add("q1_q2_ratio", ratio < *e.max_q1_q2_ratio, "|q1/q2| = " + fmt(ratio));
    }
    if (e.reference_q) {
      const Eigen::Vector2d ref = *e.reference_q;
      const Eigen::Vector2d got(ccw.q1, ccw.q2);
      bool ok = true;
      std::string detail;
      for (int k = 0; k < 2; ++k) {
        const double rel = std::abs(got(k) - ref(k)) / std::abs(ref(k));
        ok = ok && rel <= e.reference_rel_tol && got(k) * ref(k) > 0.0;
        detail += std::string(k ? ", " : "") + "q" + std::to_string(k + 1) + " = " + fmt(got(k)) + " vs " +
                  fmt(ref(k)) + " (rel " + fmt(rel) + ")";
      }
      add("reference_q", ok, detail);
    }
  }
  if (e.max_mean_deviation) {
    if (!r.deviation) {
      add("trajectory_overlay", false, "no prediction to compare");
    } else {
      const double core = r.run->seed.core_radius;
      const double mean = r.deviation->mean / core;
      const double span = r.deviation->observed_arc_length / (2.0 * core);
      add("trajectory_overlay", mean < *e.max_mean_deviation && span >= e.min_drift_core_diameters,
          "mean deviation " + fmt(mean) + " core radii over " + fmt(span) + " core diameters of drift");
    }
  }
}

Json summary_json(const PipelineResult& r) {
  Json j;
  j["manifest"] = r.manifest.name;
  j["stages"] = Json::array();
  for (const auto& s : r.stages) j["stages"].push_back({{"name", s.name}, {"ok", s.passed}, {"detail", s.detail}});
  j["expectations"] = Json::array();
  for (const auto& c : r.checks)
    j["expectations"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  if (r.run) {
    j["run"] = {{"status", to_string(r.run->status)},
                {"message", r.run->message},
                {"t_final", r.run->final_state.t},
                {"steps", r.run->steps},
                {"core_radius", r.run->seed.core_radius},
                {"omega0", r.run->seed.omega0}};
  }
  if (r.fitted) j["fitted"] = coefficients_to_json(*r.fitted);
  if (r.deviation) {
    j["deviation"] = {{"max", r.deviation->max},
                      {"mean", r.deviation->mean},
                      {"rms", r.deviation->rms},
                      {"terminal", r.deviation->terminal},
                      {"observed_arc_length", r.deviation->observed_arc_length},
                      {"samples", r.deviation->samples}};
  }
  j["passed"] = r.expectations_ok();
  return j;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentManifest& manifest, const fs::path& bundle, const RunOptions& options) {
  PipelineResult r;
  r.manifest = manifest;
  fs::create_directories(bundle);
  write_json_file(bundle / "manifest.json", manifest_to_json(manifest));
  const ExperimentConfig& cfg = manifest.experiment;
  const SurfaceSpec spec = cfg.surface_spec();
  const RicciField field = RicciField::from_spec(spec);

  auto stage = [&](const char* name, auto&& body) {
    if (!r.stages_ok()) return;
    try {
      r.stages.push_back({name, true, body()});
    } catch (const std::exception& ex) {
      r.stages.push_back({name, false, ex.what()});
    }
  };

  stage("geometry", [&] {
    write_geometry(bundle / "geometry", spec, christoffel_and_ricci(spec));
    return std::string("wrote metric and curvature grids");
  });
  if (cfg.t_end > 0.0) {
    stage("simulate", [&] {
      RunOptions ro = options;
      ro.out_dir = bundle / "run";
      r.run = run_experiment(cfg, ro);
      if (r.run->status == RunStatus::NonFinite || r.run->status == RunStatus::TrackingLost)
        throw std::runtime_error("run stopped: " + r.run->message);
      return to_string(r.run->status) + " at t = " + fmt(r.run->final_state.t);
    });
    stage("extract_drift", [&] {
      r.drift = extract_drift(r.run->trajectory, manifest.extract);
      write_drift_csv(bundle / "drift.csv", r.drift->path);
      return std::to_string(r.drift->path.points.size()) + " centre samples, " +
             std::to_string(r.drift->rotations.size()) + " rotations";
    });
    stage("fit_mobility", [&] {
      r.fit = fit_mobility({r.drift->path}, field, manifest.fit);
      MobilityCoefficients q;
      q.q1 = r.fit->q1;
      q.q2 = r.fit->q2;
      q.omega0 = r.run->seed.omega0;
      q.chirality = r.run->trajectory.chirality != 0 ? r.run->trajectory.chirality : cfg.chirality;
      std::vector<double> periods, R;
      for (const auto& w : r.drift->rotations)
        if (field.contains(w.x, w.y)) {
          periods.push_back(w.period);
          R.push_back(field.at(w.x, w.y).R);
        }
      std::string q0_note;
      try {
        r.q0 = fit_q0(periods, R, q.omega0);
        q.q0 = *r.q0;
      } catch (const std::exception& ex) {
        q0_note = std::string("; q0 not fitted: ") + ex.what();
      }
      r.fitted = q;
      const std::string digest =
          fnv1a_hex(file_digest(bundle / "run" / "tips.csv") + experiment_config_to_json(cfg).dump());
      write_json_file(bundle / "fit.json", fit_report(*r.fit, r.q0, q, digest));
      return "q1 = " + fmt(q.q1) + ", q2 = " + fmt(q.q2) + q0_note;
    });
    stage("predict", [&] {
      const auto& obs = r.drift->path.points;
      if (obs.size() < 2) throw std::runtime_error("drift path too short to predict");
      IntegrateOptions io;
      io.sample_dt = (obs.back().t - obs.front().t) / static_cast<double>(obs.size() - 1);
      DriftPath p = integrate_drift({obs.front().x, obs.front().y}, obs.back().t - obs.front().t, field, *r.fitted, io);
      for (auto& pt : p.points) pt.t += obs.front().t;
      r.prediction = std::move(p);
      write_drift_csv(bundle / "prediction.csv", *r.prediction);
      return to_string(r.prediction->status);
    });
    stage("compare", [&] {
      r.deviation = compare_trajectories(r.drift->path, *r.prediction,
                                         [&](double x, double y) { return induced_metric<double>(spec, x, y).lower; });
      return "mean " + fmt(r.deviation->mean) + ", max " + fmt(r.deviation->max);
    });
    check_expectations(r, field);
  }
  write_json_file(bundle / "summary.json", summary_json(r));
  return r;
}

}  // namespace spiraldrift
