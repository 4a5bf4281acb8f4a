#include "spiraldrift/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace spiraldrift {

namespace fs = std::filesystem;

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::TrackingLost: return "tracking_lost";
    case RunStatus::ReachedEdge: return "reached_edge";
    case RunStatus::NonFinite: return "non_finite";
  }
  return "unknown";
}

std::string code_version() { return SPIRALDRIFT_VERSION; }

namespace {

SurfaceSpec planar_surface_for(const ExperimentConfig& config) {
  return planar_seed_surface(config.surface_spec(), config.seed_L);
}

std::string seed_key(const ExperimentConfig& c, const SurfaceSpec& planar, double dt) {
  const Json j = {{"a", c.kinetics.a},     {"b", c.kinetics.b},   {"eps", c.kinetics.eps},
                  {"Du", c.kinetics.Du},   {"Dv", c.kinetics.Dv}, {"surface", surface_spec_to_json(planar)},
                  {"chirality", c.chirality}, {"dt", dt},         {"version", 1}};
  return fnv1a_hex(j.dump());
}

Json seed_summary_json(const SeedSummary& s) {
  return {{"center", {s.center(0), s.center(1)}},
          {"period", s.period},
          {"omega0", s.omega0},
          {"core_radius", s.core_radius},
          {"chart_core_radius", s.chart_core_radius},
          {"chirality", s.chirality},
          {"rotations", s.rotations}};
}

SeedSummary seed_summary_from_json(const Json& j) {
  SeedSummary s;
  const auto c = j.at("center").get<std::vector<double>>();
  s.center = Eigen::Vector2d(c.at(0), c.at(1));
  s.period = j.at("period").get<double>();
  s.omega0 = j.at("omega0").get<double>();
  s.core_radius = j.at("core_radius").get<double>();
  s.chart_core_radius = j.at("chart_core_radius").get<double>();
  s.chirality = j.at("chirality").get<int>();
  s.rotations = j.at("rotations").get<int>();
  return s;
}

void write_state(const fs::path& dir, const SpiralState& s) {
  fs::create_directories(dir);
  write_grid(dir / "u.grid", s.grid, "u", s.u);
  write_grid(dir / "v.grid", s.grid, "v", s.v);
}

SpiralState read_state(const fs::path& dir, double t) {
  GridFile u = read_grid(dir / "u.grid");
  GridFile v = read_grid(dir / "v.grid");
  if (!(u.grid == v.grid)) throw std::runtime_error("state in " + dir.string() + " has mismatched u and v grids");
  return {u.grid, std::move(u.values), std::move(v.values), t};
}

std::string snapshot_name(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t%010.3f", t);
  return buf;
}

double edge_distance(const GridGeometry& g, double x, double y) {
  return std::min({x - g.x0, g.x_max() - x, y - g.y0, g.y_max() - y});
}

struct Run {
  ExperimentResult& res;
  const RunOptions& options;
  Simulator& sim;
  long steps_before = 0;

  void evolve() {
    const ExperimentConfig& c = res.config;
    const GridGeometry grid = res.metric.grid;
    const long total = std::lround(c.t_end / res.dt);
    const long chunk = std::max(1L, std::lround(c.tip_stride / res.dt));
    const long snap_every =
        c.snapshot_stride > 0.0 ? std::max(1L, std::lround(c.snapshot_stride / (chunk * res.dt))) : 0;
    const double max_jump = 2.0 * res.seed.chart_core_radius + 2.0 * grid.dx;
    const double margin = c.edge_margin * res.seed.chart_core_radius;
    auto& traj = res.trajectory;

    std::optional<Eigen::Vector2d> prev;
    if (!traj.samples.empty()) prev = Eigen::Vector2d(traj.samples.back().x, traj.samples.back().y);
    else prev = c.seed_position;

    auto sample = [&](const SpiralState& st) {
      std::optional<TipPoint> tip;
      try {
        tip = track_tip(st, c.kinetics, prev);
      } catch (const AmbiguousTipError&) {
      }
      if (!tip) {
        res.status = RunStatus::TrackingLost;
        res.message = "no tip found at t = " + std::to_string(st.t);
        return false;
      }
      if (std::hypot(tip->x - (*prev)(0), tip->y - (*prev)(1)) > max_jump) {
        res.status = RunStatus::TrackingLost;
        res.message = "tip jumped by more than one core diameter at t = " + std::to_string(st.t);
        return false;
      }
      if (traj.samples.empty() || st.t > traj.samples.back().t) traj.append(st.t, *tip);
      prev = Eigen::Vector2d(tip->x, tip->y);
      if (edge_distance(grid, tip->x, tip->y) < margin) {
        res.status = RunStatus::ReachedEdge;
        res.message = "tip within " + std::to_string(c.edge_margin) + " core radii of the boundary at t = " +
                      std::to_string(st.t);
        return false;
      }
      return true;
    };

    long done = steps_before;
    if (traj.samples.empty() && !sample(sim.state())) return finish();
    long chunks = 0;
    while (done < total) {
      const long n = std::min(chunk, total - done);
      try {
        sim.advance(n);
      } catch (const NonFiniteStateError& e) {
        res.status = RunStatus::NonFinite;
        res.message = e.what();
        return finish();
      }
      done += n;
      ++chunks;
      const SpiralState st = sim.state();
      if (!sample(st)) return finish();
      if (options.progress) options.progress(st.t);
      if (snap_every > 0 && chunks % snap_every == 0 && !options.out_dir.empty()) write_snapshot(st, done);
    }
    finish();
  }

  void finish() {
    res.final_state = sim.state();
    res.steps = steps_before + sim.step_count();
  }

  void write_snapshot(const SpiralState& st, long steps) {
    const fs::path dir = options.out_dir / "snapshots" / snapshot_name(st.t);
    write_state(dir, st);
    write_tip_csv(dir / "tips.csv", res.trajectory);
    write_json_file(dir / "snapshot.json", {{"t", st.t},
                                            {"steps", steps},
                                            {"dt", res.dt},
                                            {"seed", seed_summary_json(res.seed)},
                                            {"config", experiment_config_to_json(res.config)}});
  }
};

void write_outputs(const ExperimentResult& res, const RunOptions& options) {
  if (options.out_dir.empty()) return;
  const fs::path& out = options.out_dir;
  fs::create_directories(out);
  write_json_file(out / "config.json", experiment_config_to_json(res.config));
  write_tip_csv(out / "tips.csv", res.trajectory);
  write_grid(out / "ricci.grid", res.metric.grid, "ricci", res.metric.ricci);
  write_grid(out / "sqrt_g.grid", res.metric.grid, "sqrt_g", res.metric.sqrt_g);
  write_json_file(out / "metadata.json", {{"status", to_string(res.status)},
                                          {"message", res.message},
                                          {"dt", res.dt},
                                          {"steps", res.steps},
                                          {"t_final", res.final_state.t},
                                          {"tip_samples", res.trajectory.samples.size()},
                                          {"wall_seconds", res.wall_seconds},
                                          {"threads", options.threads},
                                          {"version", code_version()},
                                          {"seed", seed_summary_json(res.seed)},
                                          {"config", experiment_config_to_json(res.config)}});
}

}  // namespace

SeedSummary summarize(const PlanarSeed& seed, const SurfaceSpec& planar) {
  SeedSummary s;
  s.center = seed.center;
  s.period = seed.period;
  s.omega0 = seed.omega0;
  s.core_radius = seed.core_radius;
  s.chirality = seed.chirality;
  s.rotations = seed.rotations;
  const Eigen::Matrix2d g0 = induced_metric<double>(planar, 0.0, 0.0).lower;
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(g0).eigenvalues().minCoeff();
  s.chart_core_radius = seed.core_radius / std::sqrt(lmin);
  return s;
}

void save_seed(const fs::path& dir, const PlanarSeed& seed) {
  write_state(dir, seed.state);
  write_json_file(dir / "seed.json", {{"t", seed.state.t},
                                      {"center", {seed.center(0), seed.center(1)}},
                                      {"period", seed.period},
                                      {"omega0", seed.omega0},
                                      {"core_radius", seed.core_radius},
                                      {"chirality", seed.chirality},
                                      {"rotations", seed.rotations}});
}

PlanarSeed load_seed(const fs::path& dir) {
  const Json j = read_json_file(dir / "seed.json");
  PlanarSeed s;
  s.state = read_state(dir, j.at("t").get<double>());
  const auto c = j.at("center").get<std::vector<double>>();
  s.center = Eigen::Vector2d(c.at(0), c.at(1));
  s.period = j.at("period").get<double>();
  s.omega0 = j.at("omega0").get<double>();
  s.core_radius = j.at("core_radius").get<double>();
  s.chirality = j.at("chirality").get<int>();
  s.rotations = j.at("rotations").get<int>();
  return s;
}

PlanarSeed planar_seed_for(const ExperimentConfig& config, const RunOptions& options) {
  const SurfaceSpec planar = planar_surface_for(config);
  const double dt = config.dt > 0.0 ? config.dt : max_time_step(config.surface_spec());
  fs::path cached;
  if (!options.seed_cache.empty()) {
    cached = options.seed_cache / ("seed-" + seed_key(config, planar, dt));
    if (fs::exists(cached / "seed.json")) return load_seed(cached);
  }
  SeedOptions so;
  so.L = config.seed_L;
  so.chirality = config.chirality;
  so.dt = dt;
  so.threads = options.threads;
  PlanarSeed seed = seed_spiral(planar, config.kinetics, so);
  if (!cached.empty()) save_seed(cached, seed);
  return seed;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.config = config;
  const SurfaceSpec spec = config.surface_spec();
  res.metric = christoffel_and_ricci(spec);
  res.dt = config.dt > 0.0 ? config.dt : max_time_step(spec);
  const PlanarSeed seed = planar_seed_for(config, options);
  res.seed = summarize(seed, planar_surface_for(config));

  Simulator sim(build_stencil(spec, res.metric), config.kinetics, spec.D0, res.dt, options.threads);
  sim.load(place_seed(seed, spec.grid(), config.seed_position));
  Run run{res, options, sim};
  run.evolve();
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(res, options);
  return res;
}

ExperimentResult resume_experiment(const fs::path& snapshot, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const Json meta = read_json_file(snapshot / "snapshot.json");
  ExperimentResult res;
  res.config = experiment_config_from_json(meta.at("config"));
  res.seed = seed_summary_from_json(meta.at("seed"));
  res.dt = meta.at("dt").get<double>();
  res.trajectory = read_tip_csv(snapshot / "tips.csv");
  const SurfaceSpec spec = res.config.surface_spec();
  res.metric = christoffel_and_ricci(spec);
  SpiralState st = read_state(snapshot, meta.at("t").get<double>());
  if (!(st.grid == spec.grid())) throw std::runtime_error("resume: snapshot grid does not match its config");

  Simulator sim(build_stencil(spec, res.metric), res.config.kinetics, spec.D0, res.dt, options.threads);
  sim.load(st);
  Run run{res, options, sim, meta.at("steps").get<long>()};
  run.evolve();
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(res, options);
  return res;
}

void write_tip_csv(const fs::path& path, const TipTrajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,x,y,phase,period_estimate\n";
  char buf[160];
  for (const auto& s : traj.samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.x, s.y, s.phase, s.period);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

TipTrajectory read_tip_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,x,y,phase", 0) != 0) throw std::runtime_error(path.string() + ": not a tip trajectory CSV");
  TipTrajectory traj;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    double v[4];
    const char* p = line.c_str();
    for (double& x : v) {
      char* end = nullptr;
      x = std::strtod(p, &end);
      if (end == p) throw std::runtime_error(path.string() + ": malformed row " + std::to_string(row));
      p = *end == ',' ? end + 1 : end;
    }
    traj.append(v[0], TipPoint{v[1], v[2], v[3]});
  }
  return traj;
}

}  // namespace spiraldrift
