#include "spiraldrift/response.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace spiraldrift {

static_assert(std::endian::native == std::endian::little, "response files are little-endian float64");

double PolarGrid::theta(int j) const { return 2.0 * std::numbers::pi * j / ntheta; }

namespace {

const PolarField* field_by_index(const ResponseFunctionSet& rf, int k) {
  const PolarField* all[] = {&rf.u0, &rf.dtheta_u0, &rf.dx_u0, &rf.dy_u0, &rf.Ytheta, &rf.Yx, &rf.Yy};
  return all[k];
}

PolarField* field_by_index(ResponseFunctionSet& rf, int k) {
  return const_cast<PolarField*>(field_by_index(static_cast<const ResponseFunctionSet&>(rf), k));
}

void check_field(const PolarGrid& g, int components, const PolarField& f, const std::string& name) {
  if (static_cast<int>(f.size()) != components)
    throw std::invalid_argument("response functions: field " + name + " has the wrong component count");
  for (const auto& b : f)
    if (b.rows() != g.nr || b.cols() != g.ntheta)
      throw std::invalid_argument("response functions: field " + name + " does not match the polar grid");
}

}  // namespace

void ResponseFunctionSet::validate() const {
  if (grid.nr < 5 || grid.ntheta < 4 || !(grid.radius > 0.0))
    throw std::invalid_argument("response functions: need nr >= 5, ntheta >= 4 and radius > 0");
  if (components < 1) throw std::invalid_argument("response functions: need at least one component");
  for (int k = 0; k < 7; ++k) check_field(grid, components, *field_by_index(*this, k), kFieldNames[k]);
}

ResponseFunctionSet load_response_functions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_response_functions: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "spiraldrift-response 1")
    throw std::runtime_error("load_response_functions: bad magic in " + path.string());
  ResponseFunctionSet rf;
  std::vector<std::string> order;
  bool have_scalar = false;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "nr") ls >> rf.grid.nr;
    else if (key == "ntheta") ls >> rf.grid.ntheta;
    else if (key == "radius") ls >> rf.grid.radius;
    else if (key == "components") ls >> rf.components;
    else if (key == "normalization") ls >> rf.normalization;
    else if (key == "scalar") {
      std::string v;
      ls >> v;
      if (v != "real" && v != "complex") throw std::runtime_error("load_response_functions: scalar must be real or complex");
      rf.complex_valued = v == "complex";
      have_scalar = true;
    } else if (key == "fields") {
      std::string name;
      while (ls >> name) order.push_back(name);
    } else {
      throw std::runtime_error("load_response_functions: unknown header key '" + key + "'");
    }
    if (ls.fail() && !ls.eof()) throw std::runtime_error("load_response_functions: malformed line '" + line + "'");
  }
  if (line != "end" || !have_scalar) throw std::runtime_error("load_response_functions: incomplete header");
  if (order.size() != ResponseFunctionSet::kFieldNames.size())
    throw std::runtime_error("load_response_functions: header must list all seven fields");
  if (rf.grid.nr < 5 || rf.grid.ntheta < 4 || rf.components < 1)
    throw std::runtime_error("load_response_functions: invalid grid dimensions");

  const std::size_t n = static_cast<std::size_t>(rf.grid.nr) * rf.grid.ntheta;
  const int per = rf.complex_valued ? 2 : 1;
  std::vector<double> buf(n * per);
  for (const auto& name : order) {
    int k = 0;
    while (k < 7 && name != ResponseFunctionSet::kFieldNames[k]) ++k;
    if (k == 7) throw std::runtime_error("load_response_functions: unknown field '" + name + "'");
    PolarField& f = *field_by_index(rf, k);
    if (!f.empty()) throw std::runtime_error("load_response_functions: field '" + name + "' listed twice");
    for (int c = 0; c < rf.components; ++c) {
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(sizeof(double) * buf.size()));
      if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * buf.size()))
        throw std::runtime_error("load_response_functions: truncated payload in " + path.string());
      PolarBlock b(rf.grid.nr, rf.grid.ntheta);
      for (std::size_t q = 0; q < n; ++q)
        b.data()[q] = rf.complex_valued ? std::complex<double>(buf[2 * q], buf[2 * q + 1]) : buf[q];
      f.push_back(std::move(b));
    }
  }
  rf.validate();
  return rf;
}

void save_response_functions(const std::filesystem::path& path, const ResponseFunctionSet& rf) {
  rf.validate();
  if (rf.normalization.find_first_of(" \t\n") != std::string::npos)
    throw std::invalid_argument("save_response_functions: normalization must be a single token");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_response_functions: cannot open " + path.string());
  out << std::setprecision(17) << "spiraldrift-response 1\n"
      << "nr " << rf.grid.nr << "\n"
      << "ntheta " << rf.grid.ntheta << "\n"
      << "radius " << rf.grid.radius << "\n"
      << "components " << rf.components << "\n"
      << "scalar " << (rf.complex_valued ? "complex" : "real") << "\n"
      << "normalization " << (rf.normalization.empty() ? "unspecified" : rf.normalization) << "\n"
      << "fields";
  for (const char* name : ResponseFunctionSet::kFieldNames) out << " " << name;
  out << "\nend\n";
  for (int k = 0; k < 7; ++k)
    for (const auto& b : *field_by_index(rf, k))
      for (Eigen::Index q = 0; q < b.size(); ++q) {
        const double re = b.data()[q].real();
        out.write(reinterpret_cast<const char*>(&re), sizeof re);
        if (rf.complex_valued) {
          const double im = b.data()[q].imag();
          out.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
      }
  if (!out) throw std::runtime_error("save_response_functions: write failed for " + path.string());
}

// ---------------------------------------------------------------------------

PolarBlock theta_derivative(const PolarBlock& f, int order) {
  if (order < 0) throw std::invalid_argument("theta_derivative: negative order");
  const int n = static_cast<int>(f.cols());
  Eigen::FFT<double> fft;
  PolarBlock out(f.rows(), f.cols());
  std::vector<std::complex<double>> ring(n), spec(n);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < n; ++j) ring[j] = f(i, j);
    fft.fwd(spec, ring);
    for (int k = 0; k < n; ++k) {
      const int m = k <= n / 2 ? k : k - n;
      if (n % 2 == 0 && k == n / 2 && order % 2 == 1) {
        spec[k] = 0.0;
        continue;
      }
      for (int o = 0; o < order; ++o) spec[k] *= std::complex<double>(0.0, m);
    }
    fft.inv(ring, spec);
    for (int j = 0; j < n; ++j) out(i, j) = ring[j];
  }
  return out;
}

PolarBlock radial_derivative(const PolarGrid& grid, const PolarBlock& f) {
  const int n = grid.nr;
  if (n < 5) throw std::invalid_argument("radial_derivative: need at least 5 radial nodes");
  const double inv = 1.0 / (12.0 * grid.dr());
  PolarBlock out(f.rows(), f.cols());
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    auto F = [&](int i) { return f(i, j); };
    for (int i = 0; i < n; ++i) {
      std::complex<double> d;
      if (i >= 2 && i <= n - 3) d = F(i - 2) - 8.0 * F(i - 1) + 8.0 * F(i + 1) - F(i + 2);
      else if (i == 0) d = -25.0 * F(0) + 48.0 * F(1) - 36.0 * F(2) + 16.0 * F(3) - 3.0 * F(4);
      else if (i == 1) d = -3.0 * F(0) - 10.0 * F(1) + 18.0 * F(2) - 6.0 * F(3) + F(4);
      else if (i == n - 2) d = 3.0 * F(n - 1) + 10.0 * F(n - 2) - 18.0 * F(n - 3) + 6.0 * F(n - 4) - F(n - 5);
      else d = 25.0 * F(n - 1) - 48.0 * F(n - 2) + 36.0 * F(n - 3) - 16.0 * F(n - 4) + 3.0 * F(n - 5);
      out(i, j) = grid.r(i) * d * inv;
    }
  }
  return out;
}

SourceTermFields source_terms(const PolarGrid& grid, const PolarField& u0, const std::vector<double>& P) {
  if (P.size() != u0.size()) throw std::invalid_argument("source_terms: P needs one entry per component");
  SourceTermFields s;
  s.grid = grid;
  for (std::size_t c = 0; c < u0.size(); ++c) {
    const PolarBlock& u = u0[c];
    if (u.rows() != grid.nr || u.cols() != grid.ntheta)
      throw std::invalid_argument("source_terms: field does not match the polar grid");
    const PolarBlock dth = theta_derivative(u, 1);
    const PolarBlock dth2 = theta_derivative(u, 2);
    const PolarBlock rdr = radial_derivative(grid, u);
    PolarBlock sr(grid.nr, grid.ntheta), sx(grid.nr, grid.ntheta), sy(grid.nr, grid.ntheta);
    for (int i = 0; i < grid.nr; ++i) {
      const double r = grid.r(i);
      for (int j = 0; j < grid.ntheta; ++j) {
        const double ct = std::cos(grid.theta(j)), st = std::sin(grid.theta(j));
        sr(i, j) = P[c] / 6.0 * (dth2(i, j) - rdr(i, j));
        // r^2 d_x u = r (cos t r d_r u - sin t d_t u), likewise for y.
        const std::complex<double> r2dx = r * (ct * rdr(i, j) - st * dth(i, j));
        const std::complex<double> r2dy = r * (st * rdr(i, j) + ct * dth(i, j));
        const std::complex<double> common = -rdr(i, j) / 6.0 + dth2(i, j) / 12.0;
        sx(i, j) = P[c] * (r * ct * common + r2dx / 24.0);
        sy(i, j) = P[c] * (r * st * common + r2dy / 24.0);
      }
    }
    s.SR.push_back(std::move(sr));
    s.SdR[0].push_back(std::move(sx));
    s.SdR[1].push_back(std::move(sy));
  }
  return s;
}

std::complex<double> inner_product(const PolarGrid& grid, const PolarField& f, const PolarField& g) {
  if (f.size() != g.size()) throw std::invalid_argument("inner_product: component count mismatch");
  const double dth = 2.0 * std::numbers::pi / grid.ntheta;
  std::complex<double> acc = 0.0;
  for (std::size_t c = 0; c < f.size(); ++c) {
    if (f[c].rows() != grid.nr || f[c].cols() != grid.ntheta || g[c].rows() != grid.nr ||
        g[c].cols() != grid.ntheta)
      throw std::invalid_argument("inner_product: field does not match the polar grid");
    for (int i = 0; i < grid.nr; ++i) {
      const double w = (i == 0 || i == grid.nr - 1) ? 0.5 : 1.0;
      std::complex<double> ring = 0.0;
      for (int j = 0; j < grid.ntheta; ++j) ring += std::conj(f[c](i, j)) * g[c](i, j);
      acc += w * grid.r(i) * ring;
    }
  }
  return acc * grid.dr() * dth;
}

Eigen::Matrix3cd biorthogonality(const ResponseFunctionSet& rf) {
  rf.validate();
  const PolarField* Y[3] = {&rf.Ytheta, &rf.Yx, &rf.Yy};
  const PolarField* D[3] = {&rf.dtheta_u0, &rf.dx_u0, &rf.dy_u0};
  Eigen::Matrix3cd m;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) m(a, b) = inner_product(rf.grid, *Y[a], *D[b]);
  return m;
}

OverlapCoefficients overlap_integrals(const ResponseFunctionSet& rf, const SourceTermFields& src) {
  rf.validate();
  if (!(rf.grid == src.grid)) throw std::invalid_argument("overlap_integrals: polar grids differ");
  const auto& g = rf.grid;
  const std::complex<double> q0 = inner_product(g, rf.Ytheta, src.SR);
  const std::complex<double> xx = inner_product(g, rf.Yx, src.SdR[0]);
  const std::complex<double> yy = inner_product(g, rf.Yy, src.SdR[1]);
  const std::complex<double> yx = inner_product(g, rf.Yy, src.SdR[0]);
  const std::complex<double> xy = inner_product(g, rf.Yx, src.SdR[1]);
  const std::complex<double> q1 = 0.5 * (xx + yy);
  const std::complex<double> q2 = 0.5 * (yx - xy);
  OverlapCoefficients out;
  out.q0 = q0.real();
  out.q1 = q1.real();
  out.q2 = q2.real();
  out.max_imag = std::max({std::abs(q0.imag()), std::abs(q1.imag()), std::abs(q2.imag())});
  return out;
}

}  // namespace spiraldrift
