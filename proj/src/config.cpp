#include "spiraldrift/config.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace spiraldrift {

namespace fs = std::filesystem;

namespace {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw std::invalid_argument(std::string("config: key '") + key + "' has the wrong type");
  }
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

GridFile read_table(const Json& j, const fs::path& base) {
  if (!j.contains("file")) throw std::invalid_argument("surface spec: tabulated entry needs 'file'");
  fs::path p = j.at("file").get<std::string>();
  if (p.is_relative()) p = base / p;
  return read_grid(p);
}

}  // namespace

SurfaceSpec surface_spec_from_json(const Json& j, const fs::path& base) {
  reject_unknown(j, {"shape", "fiber", "dL", "dT", "D0", "L", "dx"}, "surface spec");
  SurfaceSpec s;
  s.dL = get_or(j, "dL", 1.0);
  s.dT = get_or(j, "dT", 1.0);
  s.D0 = get_or(j, "D0", 1.0);
  s.L = get_or(j, "L", 40.0);
  s.dx = get_or(j, "dx", 0.1);
  if (j.contains("shape")) {
    const Json& sh = j.at("shape");
    reject_unknown(sh, {"kind", "A", "sign", "file"}, "surface spec shape");
    const auto kind = get_or<std::string>(sh, "kind", "plane");
    if (kind == "plane") {
      s.shape = PlaneShape{};
    } else if (kind == "paraboloid") {
      s.shape = ParaboloidShape{get_or(sh, "A", 0.0), get_or(sh, "sign", -1)};
    } else if (kind == "tabulated") {
      GridFile g = read_table(sh, base);
      s.shape = TabulatedShape{g.grid, std::move(g.values)};
    } else {
      throw std::invalid_argument("surface spec: unknown shape kind '" + kind + "'");
    }
  }
  if (j.contains("fiber")) {
    const Json& fb = j.at("fiber");
    reject_unknown(fb, {"kind", "alpha0", "B", "file"}, "surface spec fiber");
    const auto kind = get_or<std::string>(fb, "kind", "constant");
    if (kind == "constant") {
      s.fiber = ConstantFiber{get_or(fb, "alpha0", 0.0)};
    } else if (kind == "linear") {
      s.fiber = LinearFiber{get_or(fb, "B", 0.0)};
    } else if (kind == "tabulated") {
      GridFile g = read_table(fb, base);
      s.fiber = TabulatedFiber{g.grid, std::move(g.values)};
    } else {
      throw std::invalid_argument("surface spec: unknown fiber kind '" + kind + "'");
    }
  }
  s.validate();
  return s;
}

Json surface_spec_to_json(const SurfaceSpec& spec, const fs::path& tabulated_dir) {
  auto table = [&](const GridGeometry& g, const Field& f, const char* name) {
    if (tabulated_dir.empty()) throw std::invalid_argument("surface_spec_to_json: tabulated field needs a directory");
    const std::string file = std::string(name) + ".grid";
    write_grid(tabulated_dir / file, g, name, f);
    return file;
  };
  Json j;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PlaneShape>) j["shape"] = {{"kind", "plane"}};
        else if constexpr (std::is_same_v<T, ParaboloidShape>)
          j["shape"] = {{"kind", "paraboloid"}, {"A", s.A}, {"sign", s.sign}};
        else j["shape"] = {{"kind", "tabulated"}, {"file", table(s.grid, s.z, "shape")}};
      },
      spec.shape);
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantFiber>) j["fiber"] = {{"kind", "constant"}, {"alpha0", f.alpha0}};
        else if constexpr (std::is_same_v<T, LinearFiber>) j["fiber"] = {{"kind", "linear"}, {"B", f.B}};
        else j["fiber"] = {{"kind", "tabulated"}, {"file", table(f.grid, f.alpha, "fiber")}};
      },
      spec.fiber);
  j["dL"] = spec.dL;
  j["dT"] = spec.dT;
  j["D0"] = spec.D0;
  j["L"] = spec.L;
  j["dx"] = spec.dx;
  return j;
}

SurfaceSpec ExperimentConfig::surface_spec() const {
  if (surface) return *surface;
  SurfaceSpec s;
  if (A != 0.0) s.shape = ParaboloidShape{A, shape_sign};
  if (B != 0.0) s.fiber = LinearFiber{B};
  else s.fiber = ConstantFiber{alpha0};
  s.dL = DL;
  s.dT = DT;
  s.D0 = D0;
  s.L = L;
  s.dx = dx;
  return s;
}

void ExperimentConfig::validate() const {
  kinetics.validate();
  const SurfaceSpec s = surface_spec();
  s.validate();
  if (!(t_end >= 0.0)) throw std::invalid_argument("experiment config: t_end must be non-negative");
  if (chirality != 1 && chirality != -1) throw std::invalid_argument("experiment config: chirality must be +1 or -1");
  if (!(tip_stride > 0.0)) throw std::invalid_argument("experiment config: tip_stride must be positive");
  if (!(snapshot_stride >= 0.0)) throw std::invalid_argument("experiment config: snapshot_stride must be >= 0");
  if (!(seed_L >= 4.0 * s.dx)) throw std::invalid_argument("experiment config: seed_L too small for the grid");
  if (!(dt >= 0.0) || dt > max_time_step(s) * (1.0 + 1e-12))
    throw std::invalid_argument("experiment config: dt must lie in [0, explicit Euler bound]");
  if (!(edge_margin >= 0.0)) throw std::invalid_argument("experiment config: edge_margin must be >= 0");
  if (!s.grid().contains(seed_position(0), seed_position(1)))
    throw std::invalid_argument("experiment config: seed_position lies outside the domain");
}

ExperimentConfig experiment_config_from_json(const Json& j, const fs::path& base) {
  reject_unknown(j,
                 {"name", "a", "b", "eps", "A", "B", "L", "dx", "D_u", "D_v", "D_L", "D_T", "D0", "t_end",
                  "seed_position", "chirality", "shape_sign", "alpha0", "surface", "tip_stride", "snapshot_stride",
                  "seed_L", "dt", "edge_margin"},
                 "experiment config");
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name);
  c.kinetics.a = get_or(j, "a", c.kinetics.a);
  c.kinetics.b = get_or(j, "b", c.kinetics.b);
  c.kinetics.eps = get_or(j, "eps", c.kinetics.eps);
  c.kinetics.Du = get_or(j, "D_u", 1.0);
  c.kinetics.Dv = get_or(j, "D_v", c.kinetics.Dv);
  if (j.contains("surface")) {
    for (const char* k : {"A", "B", "L", "dx", "D_L", "D_T", "D0", "shape_sign", "alpha0"})
      if (j.contains(k))
        throw std::invalid_argument(std::string("experiment config: '") + k + "' conflicts with 'surface'");
    c.surface = surface_spec_from_json(j.at("surface"), base);
  } else {
    c.A = get_or(j, "A", c.A);
    c.B = get_or(j, "B", c.B);
    c.L = get_or(j, "L", c.L);
    c.dx = get_or(j, "dx", c.dx);
    c.DL = get_or(j, "D_L", c.DL);
    c.DT = get_or(j, "D_T", c.DT);
    c.D0 = get_or(j, "D0", c.D0);
    c.shape_sign = get_or(j, "shape_sign", c.shape_sign);
    c.alpha0 = get_or(j, "alpha0", c.alpha0);
  }
  c.t_end = get_or(j, "t_end", c.t_end);
  if (j.contains("seed_position")) {
    const auto p = j.at("seed_position").get<std::vector<double>>();
    if (p.size() != 2) throw std::invalid_argument("experiment config: seed_position needs two coordinates");
    c.seed_position = Eigen::Vector2d(p[0], p[1]);
  }
  c.chirality = get_or(j, "chirality", c.chirality);
  c.tip_stride = get_or(j, "tip_stride", c.tip_stride);
  c.snapshot_stride = get_or(j, "snapshot_stride", c.snapshot_stride);
  c.seed_L = get_or(j, "seed_L", c.seed_L);
  c.dt = get_or(j, "dt", c.dt);
  c.edge_margin = get_or(j, "edge_margin", c.edge_margin);
  c.validate();
  return c;
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  j["a"] = c.kinetics.a;
  j["b"] = c.kinetics.b;
  j["eps"] = c.kinetics.eps;
  j["D_u"] = c.kinetics.Du;
  j["D_v"] = c.kinetics.Dv;
  if (c.surface) {
    j["surface"] = surface_spec_to_json(*c.surface);
  } else {
    j["A"] = c.A;
    j["shape_sign"] = c.shape_sign;
    j["B"] = c.B;
    j["alpha0"] = c.alpha0;
    j["L"] = c.L;
    j["dx"] = c.dx;
    j["D_L"] = c.DL;
    j["D_T"] = c.DT;
    j["D0"] = c.D0;
  }
  j["t_end"] = c.t_end;
  j["seed_position"] = {c.seed_position(0), c.seed_position(1)};
  j["chirality"] = c.chirality;
  j["tip_stride"] = c.tip_stride;
  j["snapshot_stride"] = c.snapshot_stride;
  j["seed_L"] = c.seed_L;
  j["dt"] = c.dt;
  j["edge_margin"] = c.edge_margin;
  return j;
}

Json coefficients_to_json(const MobilityCoefficients& q) {
  return {{"q0", q.q0}, {"q1", q.q1}, {"q2", q.q2}, {"omega0", q.omega0}, {"chirality", q.chirality}};
}

MobilityCoefficients coefficients_from_json(const Json& j) {
  reject_unknown(j, {"q0", "q1", "q2", "omega0", "chirality"}, "mobility coefficients");
  MobilityCoefficients q;
  q.q0 = get_or(j, "q0", 0.0);
  q.q1 = get_or(j, "q1", 0.0);
  q.q2 = get_or(j, "q2", 0.0);
  q.omega0 = get_or(j, "omega0", 0.0);
  q.chirality = get_or(j, "chirality", 1);
  if (q.chirality != 1 && q.chirality != -1)
    throw std::invalid_argument("mobility coefficients: chirality must be +1 or -1");
  return q;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

}  // namespace spiraldrift
