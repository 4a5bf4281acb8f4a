#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spiraldrift/config.hpp"
#include "spiraldrift/driftlaw.hpp"
#include "spiraldrift/experiment.hpp"
#include "spiraldrift/geometry.hpp"
#include "spiraldrift/mobility.hpp"
#include "spiraldrift/pipeline.hpp"
#include "spiraldrift/response.hpp"

namespace fs = std::filesystem;
using namespace spiraldrift;

namespace {

// Surface spec from a surface-spec file, an experiment config or a manifest.
SurfaceSpec load_surface(const fs::path& path) {
  const Json j = read_json_file(path);
  if (j.contains("shape") || j.contains("fiber") || j.contains("dL"))
    return surface_spec_from_json(j, path.parent_path());
  if (j.contains("experiment")) return load_manifest(path).experiment.surface_spec();
  return experiment_config_from_json(j, path.parent_path()).surface_spec();
}

void print_progress(double t, double t_end) {
  static int last = -1;
  const int pct = t_end > 0.0 ? static_cast<int>(100.0 * t / t_end) : 100;
  if (pct / 10 != last / 10) {
    std::fprintf(stderr, "  t = %.1f / %.1f\n", t, t_end);
    last = pct;
  }
}

void print_result(const ExperimentResult& r) {
  std::cout << "status: " << to_string(r.status) << (r.message.empty() ? "" : " (" + r.message + ")") << "\n"
            << "t_final: " << r.final_state.t << ", steps: " << r.steps << ", dt: " << r.dt << "\n"
            << "tip samples: " << r.trajectory.samples.size() << ", rotations: " << r.trajectory.periods.size()
            << "\n"
            << "seed period: " << r.seed.period << ", core radius: " << r.seed.core_radius << "\n"
            << "wall time: " << r.wall_seconds << " s\n";
}

DriftPath drift_from_csv(const fs::path& path, const ExtractOptions& opts) {
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("t,x,y,phase", 0) == 0) return extract_drift(read_tip_csv(path), opts).path;
  return read_drift_csv(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiral-wave drift on curved anisotropic surfaces"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for the solver stage")->check(CLI::PositiveNumber);

  // geometry
  auto* geo = app.add_subcommand("geometry", "Sample metric and curvature of a surface spec");
  fs::path geo_spec, geo_out = "geometry";
  std::string geo_mode = "auto";
  geo->add_option("spec", geo_spec, "Surface spec or experiment config (JSON)")->required()->check(CLI::ExistingFile);
  geo->add_option("-o,--out", geo_out, "Output directory");
  geo->add_option("--derivatives", geo_mode, "auto, analytic or fd")
      ->check(CLI::IsMember({"auto", "analytic", "fd"}));

  // seed
  auto* seed = app.add_subcommand("seed", "Planar pre-run: create a rigidly rotating spiral");
  fs::path seed_cfg, seed_out = "seed";
  seed->add_option("config", seed_cfg, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  seed->add_option("-o,--out", seed_out, "Seed directory");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Seed, place and evolve a spiral on the target surface");
  fs::path sim_cfg, sim_out = "run", sim_cache;
  sim->add_option("config", sim_cfg, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", sim_out, "Run directory");
  sim->add_option("--seed-cache", sim_cache, "Directory of reusable planar seeds");

  // resume
  auto* res = app.add_subcommand("resume", "Continue a run from a snapshot directory");
  fs::path res_snap, res_out;
  res->add_option("snapshot", res_snap, "Snapshot directory")->required()->check(CLI::ExistingDirectory);
  res->add_option("-o,--out", res_out, "Run directory (default: the snapshot's run)");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit q1, q2 from tip or drift trajectories");
  std::vector<fs::path> fit_inputs;
  fs::path fit_out;
  double fit_omega0 = 0.0;
  int fit_chirality = 1;
  fit->add_option("inputs", fit_inputs, "Trajectory CSVs followed by the geometry config")
      ->required()
      ->expected(2, -1)
      ->check(CLI::ExistingFile);
  fit->add_option("-o,--out", fit_out, "Fit report (JSON); stdout when omitted");
  fit->add_option("--omega0", fit_omega0, "Planar angular frequency, enables the q0 fit");
  fit->add_option("--chirality", fit_chirality, "+1 counterclockwise, -1 clockwise")
      ->check(CLI::IsMember({1, -1}));

  // predict
  auto* pred = app.add_subcommand("predict", "Integrate the drift law from a start point");
  fs::path pred_spec, pred_q, pred_out;
  std::vector<double> pred_x0;
  double pred_t = 100.0, pred_dt = 1.0;
  pred->add_option("spec", pred_spec, "Surface spec or experiment config (JSON)")->required()->check(CLI::ExistingFile);
  pred->add_option("coefficients", pred_q, "Mobility coefficients (JSON)")->required()->check(CLI::ExistingFile);
  pred->add_option("--x0", pred_x0, "Start point")->expected(2)->required();
  pred->add_option("--t-end", pred_t, "Integration time")->check(CLI::NonNegativeNumber);
  pred->add_option("--sample-dt", pred_dt, "Output spacing")->check(CLI::NonNegativeNumber);
  pred->add_option("-o,--out", pred_out, "Prediction CSV; stdout when omitted");

  // coeffs
  auto* co = app.add_subcommand("coeffs", "Overlap integrals from response-function data");
  fs::path co_rf, co_kin;
  co->add_option("response", co_rf, "Response-function file")->required()->check(CLI::ExistingFile);
  co->add_option("kinetics", co_kin, "Kinetics config with D_u, D_v (JSON)")->required()->check(CLI::ExistingFile);

  // pipeline
  auto* pip = app.add_subcommand("pipeline", "Run a manifest end to end");
  std::string pip_manifest;
  fs::path pip_out, pip_cache;
  pip->add_option("manifest", pip_manifest, "Manifest file or canonical name (e.g. fig4a_desk)")->required();
  pip->add_option("-o,--out", pip_out, "Bundle directory (default: bundles/<name>)");
  pip->add_option("--seed-cache", pip_cache, "Directory of reusable planar seeds");

  // compare
  auto* cmp = app.add_subcommand("compare", "Deviation between observed and predicted drift paths");
  fs::path cmp_obs, cmp_pred;
  cmp->add_option("observed", cmp_obs, "Drift or tip CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("predicted", cmp_pred, "Drift CSV")->required()->check(CLI::ExistingFile);
  fs::path cmp_surface;
  cmp->add_option("--surface", cmp_surface, "Measure lengths with this surface's metric (JSON)")
      ->check(CLI::ExistingFile);

  // manifests
  auto* man = app.add_subcommand("manifests", "Write the canonical manifests");
  fs::path man_out = "manifests";
  man->add_option("-o,--out", man_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    RunOptions ro;
    ro.threads = threads;

    if (*geo) {
      const SurfaceSpec spec = load_surface(geo_spec);
      const DerivativeMode mode = geo_mode == "analytic" ? DerivativeMode::Analytic
                                  : geo_mode == "fd"     ? DerivativeMode::FiniteDifference
                                                         : DerivativeMode::Auto;
      const MetricField m = christoffel_and_ricci(spec, mode);
      fs::create_directories(geo_out);
      const std::pair<const char*, const Field*> fields[] = {
          {"ricci", &m.ricci}, {"sqrt_g", &m.sqrt_g}, {"g11", &m.lower[0]}, {"g12", &m.lower[1]}, {"g22", &m.lower[2]}};
      for (const auto& [name, f] : fields) {
        write_grid(geo_out / (std::string(name) + ".grid"), m.grid, name, *f);
        write_grid_csv(geo_out / (std::string(name) + ".csv"), m.grid, name, *f);
      }
      std::cout << "R in [" << m.ricci.minCoeff() << ", " << m.ricci.maxCoeff() << "]"
                << (m.analytic ? " (analytic)" : " (finite differences)") << "\n";
      return 0;
    }
    if (*seed) {
      const ExperimentConfig cfg = experiment_config_from_json(read_json_file(seed_cfg), seed_cfg.parent_path());
      const PlanarSeed s = planar_seed_for(cfg, ro);
      save_seed(seed_out, s);
      std::cout << "period " << s.period << ", omega0 " << s.omega0 << ", core radius " << s.core_radius
                << ", centre (" << s.center(0) << ", " << s.center(1) << "), " << s.rotations << " rotations\n";
      return 0;
    }
    if (*sim) {
      const ExperimentConfig cfg = experiment_config_from_json(read_json_file(sim_cfg), sim_cfg.parent_path());
      ro.out_dir = sim_out;
      ro.seed_cache = sim_cache;
      ro.progress = [&](double t) { print_progress(t, cfg.t_end); };
      const ExperimentResult r = run_experiment(cfg, ro);
      print_result(r);
      return r.status == RunStatus::NonFinite || r.status == RunStatus::TrackingLost ? 1 : 0;
    }
    if (*res) {
      ro.out_dir = res_out.empty() ? res_snap.parent_path().parent_path() : res_out;
      const ExperimentResult r = resume_experiment(res_snap, ro);
      print_result(r);
      return r.status == RunStatus::NonFinite || r.status == RunStatus::TrackingLost ? 1 : 0;
    }
    if (*fit) {
      const fs::path geometry = fit_inputs.back();
      fit_inputs.pop_back();
      const RicciField field = RicciField::from_spec(load_surface(geometry));
      std::vector<DriftPath> paths;
      std::vector<double> periods, R;
      std::string digest_input;
      for (const auto& p : fit_inputs) {
        digest_input += file_digest(p);
        std::ifstream in(p);
        std::string header;
        std::getline(in, header);
        if (header.rfind("t,x,y,phase", 0) == 0) {
          const DriftExtraction d = extract_drift(read_tip_csv(p));
          paths.push_back(d.path);
          for (const auto& w : d.rotations)
            if (field.contains(w.x, w.y)) {
              periods.push_back(w.period);
              R.push_back(field.at(w.x, w.y).R);
            }
        } else {
          paths.push_back(read_drift_csv(p));
        }
      }
      const MobilityFit f = fit_mobility(paths, field);
      MobilityCoefficients q;
      q.q1 = f.q1;
      q.q2 = f.q2;
      q.omega0 = fit_omega0;
      q.chirality = fit_chirality;
      std::optional<double> q0;
      if (fit_omega0 > 0.0 && !periods.empty()) {
        try {
          q0 = fit_q0(periods, R, fit_omega0);
          q.q0 = *q0;
        } catch (const DegenerateFitError& e) {
          std::cerr << "q0 not fitted: " << e.what() << "\n";
        }
      }
      const Json report = fit_report(f, q0, q, fnv1a_hex(digest_input));
      if (fit_out.empty()) std::cout << report.dump(2) << "\n";
      else write_json_file(fit_out, report);
      return 0;
    }
    if (*pred) {
      const RicciField field = RicciField::from_spec(load_surface(pred_spec));
      const MobilityCoefficients q = coefficients_from_json(read_json_file(pred_q));
      IntegrateOptions io;
      io.sample_dt = pred_dt;
      const DriftPath p = integrate_drift({pred_x0[0], pred_x0[1]}, pred_t, field, q, io);
      if (pred_out.empty()) {
        std::printf("t,x,y\n");
        for (const auto& pt : p.points) std::printf("%.17g,%.17g,%.17g\n", pt.t, pt.x, pt.y);
      } else {
        write_drift_csv(pred_out, p);
      }
      if (p.status != DriftStatus::Completed) std::cerr << "path " << to_string(p.status) << "\n";
      return 0;
    }
    if (*co) {
      const ResponseFunctionSet rf = load_response_functions(co_rf);
      const Json kin = read_json_file(co_kin);
      std::vector<double> P(rf.components, 1.0);
      P[0] = kin.value("D_u", 1.0);
      if (rf.components > 1) P[1] = kin.value("D_v", 1.0);
      const Eigen::Matrix3cd bio = biorthogonality(rf);
      const OverlapCoefficients q = overlap_integrals(rf, source_terms(rf.grid, rf.u0, P));
      Json out = {{"q0", q.q0}, {"q1", q.q1}, {"q2", q.q2}, {"max_imag", q.max_imag},
                  {"normalization", rf.normalization}};
      out["biorthogonality_diagonal"] = {bio(0, 0).real(), bio(1, 1).real(), bio(2, 2).real()};
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*pip) {
      const bool is_file = fs::is_regular_file(pip_manifest);
      const ExperimentManifest m = is_file ? load_manifest(pip_manifest) : canonical_manifest(pip_manifest);
      const fs::path bundle = pip_out.empty() ? fs::path("bundles") / m.name : pip_out;
      ro.seed_cache = pip_cache;
      ro.progress = [&](double t) { print_progress(t, m.experiment.t_end); };
      const PipelineResult r = run_pipeline(m, bundle, ro);
      for (const auto& s : r.stages) std::cout << (s.passed ? "[ok]   " : "[FAIL] ") << s.name << ": " << s.detail << "\n";
      for (const auto& c : r.checks)
        std::cout << (c.passed ? "[pass] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
      std::cout << "bundle: " << bundle.string() << "\n";
      return r.expectations_ok() ? 0 : 1;
    }
    if (*cmp) {
      MetricAt metric;
      if (!cmp_surface.empty()) {
        const SurfaceSpec spec = load_surface(cmp_surface);
        metric = [spec](double x, double y) { return induced_metric<double>(spec, x, y).lower; };
      }
      const DeviationReport d = compare_trajectories(drift_from_csv(cmp_obs, {}), read_drift_csv(cmp_pred), metric);
      const Json out = {{"max", d.max},         {"mean", d.mean},
                        {"rms", d.rms},         {"terminal", d.terminal},
                        {"samples", d.samples}, {"observed_arc_length", d.observed_arc_length}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*man) {
      fs::create_directories(man_out);
      for (const auto& name : canonical_manifest_names())
        write_json_file(man_out / (name + ".json"), manifest_to_json(canonical_manifest(name)));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
