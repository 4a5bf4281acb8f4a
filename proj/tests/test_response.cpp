#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "spiraldrift/response.hpp"

using namespace spiraldrift;
using std::numbers::pi;
using cd = std::complex<double>;
namespace fs = std::filesystem;

namespace {

template <class F>
PolarBlock sample(const PolarGrid& g, F f) {
  PolarBlock b(g.nr, g.ntheta);
  for (int i = 0; i < g.nr; ++i)
    for (int j = 0; j < g.ntheta; ++j) b(i, j) = f(g.r(i), g.theta(j));
  return b;
}

double max_abs(const PolarBlock& b) { return b.abs().maxCoeff(); }

ResponseFunctionSet empty_set(const PolarGrid& g, int components = 1) {
  ResponseFunctionSet rf;
  rf.grid = g;
  rf.components = components;
  const PolarBlock zero = PolarBlock::Zero(g.nr, g.ntheta);
  for (auto* f : {&rf.u0, &rf.dtheta_u0, &rf.dx_u0, &rf.dy_u0, &rf.Ytheta, &rf.Yx, &rf.Yy})
    *f = PolarField(components, zero);
  return rf;
}

SourceTermFields zero_sources(const PolarGrid& g, int components = 1) {
  SourceTermFields s;
  s.grid = g;
  const PolarBlock zero = PolarBlock::Zero(g.nr, g.ntheta);
  s.SR = PolarField(components, zero);
  s.SdR[0] = s.SR;
  s.SdR[1] = s.SR;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spiraldrift-tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("spectral angular derivatives") {
  const PolarGrid g{5, 32, 1.0};
  const PolarBlock f = sample(g, [](double r, double t) { return cd(r * std::cos(3.0 * t) + std::sin(t), 0.0); });
  const PolarBlock d1 = theta_derivative(f, 1);
  const PolarBlock d2 = theta_derivative(f, 2);
  const PolarBlock e1 = sample(g, [](double r, double t) { return cd(-3.0 * r * std::sin(3.0 * t) + std::cos(t), 0.0); });
  const PolarBlock e2 = sample(g, [](double r, double t) { return cd(-9.0 * r * std::cos(3.0 * t) - std::sin(t), 0.0); });
  CHECK(max_abs(d1 - e1) < 1e-12);
  CHECK(max_abs(d2 - e2) < 1e-12);
  CHECK(max_abs(theta_derivative(f, 0) - f) < 1e-14);
  CHECK_THROWS_AS(theta_derivative(f, -1), std::invalid_argument);
}

TEST_CASE("radial derivative is fourth order") {
  auto err = [](int nr) {
    const PolarGrid g{nr, 4, 2.0};
    const PolarBlock f = sample(g, [](double r, double) { return cd(std::sin(1.3 * r), 0.0); });
    const PolarBlock e = sample(g, [](double r, double) { return cd(1.3 * r * std::cos(1.3 * r), 0.0); });
    return max_abs(radial_derivative(g, f) - e);
  };
  const double e1 = err(41), e2 = err(81);
  CHECK(std::log2(e1 / e2) > 3.7);
}

TEST_CASE("source terms of a Gaussian match closed forms") {
  const PolarGrid g{2001, 16, 4.0};
  const std::vector<double> P = {1.0, 0.0};
  const PolarBlock u = sample(g, [](double r, double) { return cd(std::exp(-r * r), 0.0); });
  const SourceTermFields s = source_terms(g, {u, u}, P);
  // u0 = exp(-r^2): S^R = (1/3) r^2 u0 and S^dR_A = (1/4) rho_A r^2 u0.
  const PolarBlock sr = sample(g, [](double r, double) { return cd(r * r * std::exp(-r * r) / 3.0, 0.0); });
  const PolarBlock sx = sample(g, [](double r, double t) { return cd(r * std::cos(t) * r * r * std::exp(-r * r) / 4.0, 0.0); });
  const PolarBlock sy = sample(g, [](double r, double t) { return cd(r * std::sin(t) * r * r * std::exp(-r * r) / 4.0, 0.0); });
  CHECK(max_abs(s.SR[0] - sr) < 1e-8 * max_abs(sr));
  CHECK(max_abs(s.SdR[0][0] - sx) < 1e-8 * max_abs(sx));
  CHECK(max_abs(s.SdR[1][0] - sy) < 1e-8 * max_abs(sy));
  // The second component has no diffusion.
  CHECK(max_abs(s.SR[1]) == 0.0);
  CHECK(max_abs(s.SdR[0][1]) == 0.0);
}

TEST_CASE("source terms of a radially symmetric field lose the angular term") {
  const PolarGrid g{801, 8, 3.0};
  const PolarBlock u = sample(g, [](double r, double) { return cd(1.0 / (1.0 + r * r), 0.0); });
  const SourceTermFields s = source_terms(g, {u}, {2.0});
  const PolarBlock rdr = radial_derivative(g, u);
  CHECK(max_abs(s.SR[0] - (-(2.0 / 6.0) * rdr)) < 1e-12);
}

TEST_CASE("source terms of a rotation eigenfield") {
  // u0 = e^{i theta} h(r) with h = r exp(-r^2), i.e. u0 = (x + i y) exp(-r^2).
  const PolarGrid g{2001, 16, 4.0};
  auto h = [](double r) { return r * std::exp(-r * r); };
  const PolarBlock u = sample(g, [&](double r, double t) { return std::polar(1.0, t) * h(r); });
  const double P = 1.5;
  const SourceTermFields s = source_terms(g, {u}, {P});
  // d_theta^2 u0 = -u0, so S^R = -(P/6)(u0 + r d_r u0) with r d_r h = (r - 2 r^3) exp(-r^2).
  const PolarBlock sr = sample(g, [&](double r, double t) {
    return -(P / 6.0) * std::polar(1.0, t) * (h(r) + (r - 2.0 * r * r * r) * std::exp(-r * r));
  });
  CHECK(max_abs(s.SR[0] - sr) < 1e-8 * max_abs(sr));
  // Cartesian oracle for S^dR_x: d_x u0 = (1 - 2 x (x + i y)) exp(-r^2).
  const PolarBlock sx = sample(g, [&](double r, double t) {
    const double x = r * std::cos(t), y = r * std::sin(t), e = std::exp(-r * r);
    const cd z(x, y);
    const cd rdr = z * (1.0 - 2.0 * r * r) * e;
    const cd dth2 = -z * e;
    const cd dx = (1.0 - 2.0 * x * z) * e;
    return P * (-x * rdr / 6.0 + x * dth2 / 12.0 + r * r * dx / 24.0);
  });
  CHECK(max_abs(s.SdR[0][0] - sx) < 1e-8 * max_abs(sx));
}

TEST_CASE("source terms validate their inputs") {
  const PolarGrid g{11, 8, 1.0};
  const PolarBlock u = PolarBlock::Zero(g.nr, g.ntheta);
  CHECK_THROWS_AS(source_terms(g, {u}, {1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(source_terms(g, {PolarBlock::Zero(10, 8)}, {1.0}), std::invalid_argument);
}

TEST_CASE("overlap integrals vanish for zero sources") {
  const PolarGrid g{41, 16, 4.0};
  ResponseFunctionSet rf = empty_set(g, 2);
  rf.Ytheta[0] = sample(g, [](double r, double) { return cd(std::exp(-r * r), 0.0); });
  rf.Yx = rf.Yy = rf.Ytheta;
  const OverlapCoefficients q = overlap_integrals(rf, zero_sources(g, 2));
  CHECK(q.q0 == 0.0);
  CHECK(q.q1 == 0.0);
  CHECK(q.q2 == 0.0);
  CHECK(q.max_imag == 0.0);
}

TEST_CASE("overlap quadrature of a separable integrand") {
  // <Y|S> = 2 pi int r^3 exp(-2 r^2) dr = pi / 4 for Y = r e^{i theta}, S = r exp(-2 r^2) e^{i theta}.
  const PolarGrid g{240, 128, 5.0};
  ResponseFunctionSet rf = empty_set(g);
  const PolarBlock Y = sample(g, [](double r, double t) { return std::polar(r, t); });
  const PolarBlock S = sample(g, [](double r, double t) { return std::polar(r * std::exp(-2.0 * r * r), t); });
  rf.Ytheta = {Y};
  SourceTermFields src = zero_sources(g);
  src.SR = {S};
  CHECK(inner_product(g, {Y}, {S}).real() == doctest::Approx(pi / 4.0).epsilon(1e-6));
  const OverlapCoefficients q = overlap_integrals(rf, src);
  CHECK(std::abs(q.q0 - pi / 4.0) < 1e-6);
  CHECK(q.max_imag < 1e-12);
}

TEST_CASE("overlap coefficients follow the alternating-symbol convention") {
  const PolarGrid g{240, 64, 5.0};
  const PolarBlock Y = sample(g, [](double r, double) { return cd(r, 0.0); });
  const PolarBlock S = sample(g, [](double r, double) { return cd(r * std::exp(-2.0 * r * r), 0.0); });
  const double I = pi / 4.0;
  SourceTermFields src = zero_sources(g);
  src.SdR[0] = {S};
  {
    ResponseFunctionSet rf = empty_set(g);
    rf.Yx = {Y};
    const OverlapCoefficients q = overlap_integrals(rf, src);
    CHECK(q.q1 == doctest::Approx(0.5 * I).epsilon(1e-6));
    CHECK(q.q2 == doctest::Approx(0.0));
  }
  {
    // q2 = (1/2)(<Y^y|S^dR_x> - <Y^x|S^dR_y>).
    ResponseFunctionSet rf = empty_set(g);
    rf.Yy = {Y};
    const OverlapCoefficients q = overlap_integrals(rf, src);
    CHECK(q.q1 == doctest::Approx(0.0));
    CHECK(q.q2 == doctest::Approx(0.5 * I).epsilon(1e-6));
    SourceTermFields swapped = zero_sources(g);
    swapped.SdR[1] = {S};
    ResponseFunctionSet rx = empty_set(g);
    rx.Yx = {Y};
    CHECK(overlap_integrals(rx, swapped).q2 == doctest::Approx(-0.5 * I).epsilon(1e-6));
  }
  CHECK_THROWS_AS(overlap_integrals(empty_set(g), zero_sources(PolarGrid{120, 64, 5.0})), std::invalid_argument);
}

TEST_CASE("overlap quadrature converges at second order") {
  // int_0^R (1 + r) exp(-r^2) r dr has a non-zero end slope, so the trapezoid rule is second order.
  const double R = 6.0;
  const double exact = 2.0 * pi * (0.5 * (1.0 - std::exp(-R * R)) +
                                   (std::sqrt(pi) / 4.0 * std::erf(R) - 0.5 * R * std::exp(-R * R)));
  auto err = [&](int intervals) {
    const PolarGrid g{intervals + 1, 8, R};
    const PolarBlock Y = sample(g, [](double r, double) { return cd(1.0 + r, 0.0); });
    const PolarBlock S = sample(g, [](double r, double) { return cd(std::exp(-r * r), 0.0); });
    return std::abs(inner_product(g, {Y}, {S}).real() - exact);
  };
  const double e1 = err(40), e2 = err(80), e3 = err(160);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("biorthogonality matrix collects the pairwise products") {
  const PolarGrid g{101, 32, 4.0};
  ResponseFunctionSet rf = empty_set(g);
  rf.dtheta_u0 = {sample(g, [](double r, double t) { return std::polar(r * std::exp(-r * r), t); })};
  rf.dx_u0 = {sample(g, [](double r, double t) { return cd(std::cos(t) * std::exp(-r * r), 0.0); })};
  rf.dy_u0 = {sample(g, [](double r, double t) { return cd(std::sin(t) * std::exp(-r * r), 0.0); })};
  rf.Ytheta = rf.dtheta_u0;
  rf.Yx = rf.dx_u0;
  rf.Yy = rf.dy_u0;
  const Eigen::Matrix3cd m = biorthogonality(rf);
  CHECK(m(0, 0).real() > 0.0);
  CHECK(std::abs(m(1, 2)) < 1e-12);
  CHECK(std::abs(m(2, 1)) < 1e-12);
  CHECK(m(1, 1).real() == doctest::Approx(m(2, 2).real()));
  CHECK((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("response-function files round-trip") {
  const PolarGrid g{7, 6, 2.5};
  for (bool complex_valued : {false, true}) {
    ResponseFunctionSet rf = empty_set(g, 2);
    rf.complex_valued = complex_valued;
    rf.normalization = "Ytheta.dtheta_u0=-1";
    int k = 0;
    for (auto* f : {&rf.u0, &rf.dtheta_u0, &rf.dx_u0, &rf.dy_u0, &rf.Ytheta, &rf.Yx, &rf.Yy})
      for (auto& b : *f)
        for (Eigen::Index q = 0; q < b.size(); ++q, ++k)
          b.data()[q] = cd(0.1 * k + 1.0 / 3.0, complex_valued ? -0.01 * k : 0.0);
    const fs::path p = scratch(complex_valued ? "rf-complex.bin" : "rf-real.bin");
    save_response_functions(p, rf);
    const ResponseFunctionSet back = load_response_functions(p);
    CHECK(back.grid == g);
    CHECK(back.components == 2);
    CHECK(back.complex_valued == complex_valued);
    CHECK(back.normalization == rf.normalization);
    for (int f = 0; f < 7; ++f) {
      const PolarField& a = f == 0 ? rf.u0 : f == 1 ? rf.dtheta_u0 : f == 2 ? rf.dx_u0 : f == 3 ? rf.dy_u0
                            : f == 4 ? rf.Ytheta : f == 5 ? rf.Yx : rf.Yy;
      const PolarField& b = f == 0 ? back.u0 : f == 1 ? back.dtheta_u0 : f == 2 ? back.dx_u0 : f == 3 ? back.dy_u0
                            : f == 4 ? back.Ytheta : f == 5 ? back.Yx : back.Yy;
      for (int c = 0; c < 2; ++c) CHECK((a[c] == b[c]).all());
    }
  }
}

TEST_CASE("malformed response-function files are rejected") {
  const PolarGrid g{7, 6, 2.5};
  ResponseFunctionSet rf = empty_set(g);
  const fs::path good = scratch("rf-good.bin");
  save_response_functions(good, rf);

  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
  };
  const fs::path bad = scratch("rf-bad.bin");
  write(bad, "not-a-response-file\n");
  CHECK_THROWS_AS(load_response_functions(bad), std::runtime_error);
  write(bad, "spiraldrift-response 1\nnr 7\nntheta 6\nradius 2.5\ncomponents 1\nscalar real\nbogus 3\nend\n");
  CHECK_THROWS_AS(load_response_functions(bad), std::runtime_error);
  write(bad, "spiraldrift-response 1\nnr 7\nntheta 6\nradius 2.5\ncomponents 1\nscalar real\n"
             "fields u0 dtheta_u0 dx_u0 dy_u0 Ytheta Yx Yy\nend\n");
  CHECK_THROWS_AS(load_response_functions(bad), std::runtime_error);
  // Truncate the good file's payload.
  fs::copy_file(good, bad, fs::copy_options::overwrite_existing);
  fs::resize_file(bad, fs::file_size(good) - 8);
  CHECK_THROWS_AS(load_response_functions(bad), std::runtime_error);
  CHECK_THROWS_AS(load_response_functions(scratch("does-not-exist.bin")), std::runtime_error);

  rf.normalization = "two tokens";
  CHECK_THROWS_AS(save_response_functions(bad, rf), std::invalid_argument);
  rf.normalization.clear();
  rf.Yx.clear();
  CHECK_THROWS_AS(save_response_functions(bad, rf), std::invalid_argument);
}
