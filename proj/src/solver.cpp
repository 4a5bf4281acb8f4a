#include "spiraldrift/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace spiraldrift {

void BarkleyKinetics::validate() const {
  if (!(eps > 0.0)) throw std::invalid_argument("kinetics: eps must be positive");
  if (!(a > 0.0)) throw std::invalid_argument("kinetics: a must be positive");
  if (!(Du >= 0.0) || !(Dv >= 0.0)) throw std::invalid_argument("kinetics: diffusion weights must be non-negative");
}

namespace {

// h^AB = sqrt(g) g^AB at the x-faces (i+1/2, j) and y-faces (i, j+1/2).
struct HalfNodes {
  Field x11, x12;  // ny x (nx-1)
  Field y22, y12;  // (ny-1) x nx
};

HalfNodes averaged_half_nodes(const MetricField& m) {
  const int nx = m.grid.nx, ny = m.grid.ny;
  const Field h11 = m.sqrt_g * m.upper[0];
  const Field h12 = m.sqrt_g * m.upper[1];
  const Field h22 = m.sqrt_g * m.upper[2];
  HalfNodes h;
  h.x11 = 0.5 * (h11.leftCols(nx - 1) + h11.rightCols(nx - 1));
  h.x12 = 0.5 * (h12.leftCols(nx - 1) + h12.rightCols(nx - 1));
  h.y22 = 0.5 * (h22.topRows(ny - 1) + h22.bottomRows(ny - 1));
  h.y12 = 0.5 * (h12.topRows(ny - 1) + h12.bottomRows(ny - 1));
  return h;
}

HalfNodes analytic_half_nodes(const SurfaceSpec& spec, const GridGeometry& g) {
  HalfNodes h;
  h.x11.resize(g.ny, g.nx - 1);
  h.x12.resize(g.ny, g.nx - 1);
  h.y22.resize(g.ny - 1, g.nx);
  h.y12.resize(g.ny - 1, g.nx);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      const auto m = induced_metric(spec, g.x(i) + 0.5 * g.dx, g.y(j));
      h.x11(j, i) = m.sqrt_g * m.upper(0, 0);
      h.x12(j, i) = m.sqrt_g * m.upper(0, 1);
    }
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const auto m = induced_metric(spec, g.x(i), g.y(j) + 0.5 * g.dx);
      h.y22(j, i) = m.sqrt_g * m.upper(1, 1);
      h.y12(j, i) = m.sqrt_g * m.upper(0, 1);
    }
  return h;
}

struct Term {
  int dm, dn;  // node offset relative to the face's lower node
  double w;
};

// Assemble C from face fluxes. Each face flux is a difference of nodal
// values and enters its two cells with opposite signs, so the operator
// conserves sum(sqrt g u) and annihilates constants. Faces on the domain
// edge carry no flux. On edge rows the transverse derivative along a face
// is one-sided.
StencilTable assemble(const GridGeometry& g, const HalfNodes& h, const Field& sqrt_g) {
  if (g.nx < 3 || g.ny < 3) throw std::invalid_argument("build_stencil: grid needs at least 3x3 nodes");
  StencilTable st;
  st.grid = g;
  for (auto& c : st.C) c = g.zeros();
  st.inv_sqrt_g = sqrt_g.inverse();

  auto scatter = [&](int pi, int pj, int qi, int qj, const Term* terms, int count) {
    for (int k = 0; k < count; ++k) {
      const Term& t = terms[k];
      st.C[StencilTable::index(t.dm, t.dn)](pj, pi) += t.w;
      st.C[StencilTable::index(t.dm - (qi - pi), t.dn - (qj - pj))](qj, qi) -= t.w;
    }
  };

  // x-faces between (i, j) and (i+1, j).
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      const double a = h.x11(j, i);
      const double c = h.x12(j, i);
      Term terms[6];
      int n = 0;
      terms[n++] = {1, 0, a};
      terms[n++] = {0, 0, -a};
      if (j > 0 && j + 1 < g.ny) {
        terms[n++] = {1, 1, 0.25 * c};
        terms[n++] = {0, 1, 0.25 * c};
        terms[n++] = {1, -1, -0.25 * c};
        terms[n++] = {0, -1, -0.25 * c};
      } else {
        const int hi = (j + 1 < g.ny) ? 1 : 0;
        const int lo = hi - 1;
        terms[n++] = {1, hi, 0.5 * c};
        terms[n++] = {0, hi, 0.5 * c};
        terms[n++] = {1, lo, -0.5 * c};
        terms[n++] = {0, lo, -0.5 * c};
      }
      scatter(i, j, i + 1, j, terms, n);
    }
  // y-faces between (i, j) and (i, j+1).
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double a = h.y22(j, i);
      const double c = h.y12(j, i);
      Term terms[6];
      int n = 0;
      terms[n++] = {0, 1, a};
      terms[n++] = {0, 0, -a};
      if (i > 0 && i + 1 < g.nx) {
        terms[n++] = {1, 1, 0.25 * c};
        terms[n++] = {1, 0, 0.25 * c};
        terms[n++] = {-1, 1, -0.25 * c};
        terms[n++] = {-1, 0, -0.25 * c};
      } else {
        const int hi = (i + 1 < g.nx) ? 1 : 0;
        const int lo = hi - 1;
        terms[n++] = {hi, 1, 0.5 * c};
        terms[n++] = {hi, 0, 0.5 * c};
        terms[n++] = {lo, 1, -0.5 * c};
        terms[n++] = {lo, 0, -0.5 * c};
      }
      scatter(i, j, i, j + 1, terms, n);
    }
  return st;
}

}  // namespace

StencilTable build_stencil(const MetricField& metric) {
  return assemble(metric.grid, averaged_half_nodes(metric), metric.sqrt_g);
}

StencilTable build_stencil(const SurfaceSpec& spec, const MetricField& metric) {
  if (!spec.analytic()) return build_stencil(metric);
  if (!(spec.grid() == metric.grid)) throw std::invalid_argument("build_stencil: metric grid does not match spec");
  return assemble(metric.grid, analytic_half_nodes(spec, metric.grid), metric.sqrt_g);
}

double max_time_step(const SurfaceSpec& spec) {
  const double Dmax = std::max(spec.dL, spec.dT) * spec.D0;
  return 0.9 * spec.dx * spec.dx / (4.0 * Dmax);
}

NonFiniteStateError::NonFiniteStateError(int i_, int j_, double t_, const std::string& field)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "non-finite " << field << " at cell (" << i_ << ", " << j_ << ") at t = " << t_;
        return os.str();
      }()),
      i(i_),
      j(j_),
      t(t_) {}

Simulator::Simulator(StencilTable stencil, BarkleyKinetics kinetics, double D0, double dt, int threads)
    : stencil_(std::move(stencil)),
      kin_(kinetics),
      D0_(D0),
      dt_(dt),
      threads_(std::max(1, threads)),
      nx_(stencil_.grid.nx),
      ny_(stencil_.grid.ny),
      stride_(stencil_.grid.nx + 2) {
  kin_.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("simulator: dt must be positive");
  const std::size_t n = static_cast<std::size_t>(stride_) * (ny_ + 2);
  u_.assign(n, 0.0);
  v_.assign(n, 0.0);
  u_next_.assign(n, 0.0);
  v_next_.assign(n, 0.0);
}

void Simulator::load(const SpiralState& s) {
  if (!(s.grid == stencil_.grid) || s.u.rows() != ny_ || s.u.cols() != nx_ || s.v.rows() != ny_ ||
      s.v.cols() != nx_)
    throw std::invalid_argument("simulator: state grid does not match the stencil");
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const std::size_t k = static_cast<std::size_t>(j + 1) * stride_ + (i + 1);
      u_[k] = s.u(j, i);
      v_[k] = s.v(j, i);
    }
  t_ = s.t;
  steps_ = 0;
}

SpiralState Simulator::state() const {
  SpiralState s = SpiralState::rest(stencil_.grid);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const std::size_t k = static_cast<std::size_t>(j + 1) * stride_ + (i + 1);
      s.u(j, i) = u_[k];
      s.v(j, i) = v_[k];
    }
  s.t = t_;
  return s;
}

namespace {

struct RowParams {
  int nx;
  int stride;
  double inv_dx2, dt, du, dv;
  double a_inv, b, eps_inv;
};

inline double stencil_sum(const double* const* c, const double* w, int i, int s) {
  double acc = c[0][i] * w[i - s - 1];
  acc += c[1][i] * w[i - 1];
  acc += c[2][i] * w[i + s - 1];
  acc += c[3][i] * w[i - s];
  acc += c[4][i] * w[i];
  acc += c[5][i] * w[i + s];
  acc += c[6][i] * w[i - s + 1];
  acc += c[7][i] * w[i + 1];
  acc += c[8][i] * w[i + s + 1];
  return acc;
}

// Same sum with restrict-qualified operands so the row loop vectorizes.
#define SPIRALDRIFT_STENCIL(w)                                                                     \
  (c0[i] * w[i - s - 1] + c1[i] * w[i - 1] + c2[i] * w[i + s - 1] + c3[i] * w[i - s] + c4[i] * w[i] + \
   c5[i] * w[i + s] + c6[i] * w[i - s + 1] + c7[i] * w[i + 1] + c8[i] * w[i + s + 1])

// Returns false if any updated value is NaN or infinite. The operands are
// restrict-qualified parameters so the loop vectorizes.
template <bool DiffuseV, bool React>
[[gnu::noinline]] bool update_row(const double* __restrict c0, const double* __restrict c1,
                                  const double* __restrict c2, const double* __restrict c3,
                                  const double* __restrict c4, const double* __restrict c5,
                                  const double* __restrict c6, const double* __restrict c7,
                                  const double* __restrict c8, const double* __restrict isg,
                                  const double* __restrict u, const double* __restrict v, double* __restrict un,
                                  double* __restrict vn, const RowParams& p) {
  const int s = p.stride;
  const int nx = p.nx;
  const double inv_dx2 = p.inv_dx2, dt = p.dt, du = p.du, dv = p.dv;
  const double a_inv = p.a_inv, b = p.b, eps_inv = p.eps_inv;
  constexpr double huge = std::numeric_limits<double>::max();
  int bad = 0;
  for (int i = 0; i < nx; ++i) {
    const double uu = u[i];
    const double vv = v[i];
    const double lap_u = SPIRALDRIFT_STENCIL(u) * isg[i] * inv_dx2;
    double fu = 0.0, gv = 0.0;
    if constexpr (React) {
      fu = eps_inv * uu * (1.0 - uu) * (uu - (vv + b) * a_inv);
      gv = uu - vv;
    }
    const double unew = uu + dt * (du * lap_u + fu);
    double vnew;
    if constexpr (DiffuseV) {
      const double lap_v = SPIRALDRIFT_STENCIL(v) * isg[i] * inv_dx2;
      vnew = vv + dt * (dv * lap_v + gv);
    } else {
      vnew = vv + dt * gv;
    }
    un[i] = unew;
    vn[i] = vnew;
    bad |= !(std::abs(unew) <= huge);
    bad |= !(std::abs(vnew) <= huge);
  }
  return bad == 0;
}

#undef SPIRALDRIFT_STENCIL

}  // namespace

void Simulator::advance(long steps) {
  const double inv_dx2 = 1.0 / (stencil_.grid.dx * stencil_.grid.dx);
  const double du = D0_ * kin_.Du;
  const double dv = D0_ * kin_.Dv;
  const bool diffuse_v = kin_.Dv != 0.0;
  const RowParams params{nx_, stride_, inv_dx2, dt_, du, dv, 1.0 / kin_.a, kin_.b, 1.0 / kin_.eps};
  const auto kernel = kin_.reaction ? (diffuse_v ? &update_row<true, true> : &update_row<false, true>)
                                    : (diffuse_v ? &update_row<true, false> : &update_row<false, false>);
  // Updates row j from (su, sv) into (du_, dv_) and returns false on NaN/Inf.
  auto row = [&](int j, const std::vector<double>& su, const std::vector<double>& sv, std::vector<double>& tu,
                 std::vector<double>& tv) {
    const std::size_t r = static_cast<std::size_t>(j) * nx_;
    const std::size_t off = static_cast<std::size_t>(j + 1) * stride_ + 1;
    const auto& C = stencil_.C;
    return kernel(C[0].data() + r, C[1].data() + r, C[2].data() + r, C[3].data() + r, C[4].data() + r,
                  C[5].data() + r, C[6].data() + r, C[7].data() + r, C[8].data() + r,
                  stencil_.inv_sqrt_g.data() + r, su.data() + off, sv.data() + off, tu.data() + off,
                  tv.data() + off, params);
  };
  const double t_start = t_;
  const long base = steps_;
  auto finish = [&](long n, bool ok) {
    steps_ += n;
    t_ = t_start + static_cast<double>(steps_ - base) * dt_;
    if (!ok) report_non_finite();
  };

  long done = 0;
  if (threads_ == 1) {
    // Two steps per sweep: the second step trails the first by one row, so
    // the rows it reads are still cache resident. Every cell sees exactly
    // the same arithmetic as in the row-parallel path.
    for (; done + 2 <= steps; done += 2) {
      bool ok = true;
      for (int j = 0; j <= ny_; ++j) {
        if (j < ny_) ok &= row(j, u_, v_, u_next_, v_next_);
        if (j > 0) ok &= row(j - 1, u_next_, v_next_, u_, v_);
      }
      finish(2, ok);
    }
  }
  std::vector<char> row_ok(ny_);
  for (; done < steps; ++done) {
#pragma omp parallel for num_threads(threads_) schedule(static)
    for (int j = 0; j < ny_; ++j) row_ok[j] = row(j, u_, v_, u_next_, v_next_);
    std::swap(u_, u_next_);
    std::swap(v_, v_next_);
    finish(1, std::all_of(row_ok.begin(), row_ok.end(), [](char c) { return c != 0; }));
  }
}

void Simulator::report_non_finite() const {
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const std::size_t k = static_cast<std::size_t>(j + 1) * stride_ + (i + 1);
      if (!std::isfinite(u_[k])) throw NonFiniteStateError(i, j, t_, "u");
      if (!std::isfinite(v_[k])) throw NonFiniteStateError(i, j, t_, "v");
    }
  throw NonFiniteStateError(-1, -1, t_, "state");
}

Field Simulator::laplacian(const Field& w) const {
  if (w.rows() != ny_ || w.cols() != nx_) throw std::invalid_argument("laplacian: field shape mismatch");
  std::vector<double> pad(static_cast<std::size_t>(stride_) * (ny_ + 2), 0.0);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) pad[static_cast<std::size_t>(j + 1) * stride_ + (i + 1)] = w(j, i);
  const double inv_dx2 = 1.0 / (stencil_.grid.dx * stencil_.grid.dx);
  Field out(ny_, nx_);
  for (int j = 0; j < ny_; ++j) {
    const double* c[9];
    for (int k = 0; k < 9; ++k) c[k] = stencil_.C[k].data() + static_cast<std::size_t>(j) * nx_;
    const double* row = pad.data() + static_cast<std::size_t>(j + 1) * stride_ + 1;
    for (int i = 0; i < nx_; ++i) out(j, i) = stencil_sum(c, row, i, stride_) * stencil_.inv_sqrt_g(j, i) * inv_dx2;
  }
  return out;
}

SpiralState step(const SpiralState& state, const StencilTable& stencil, const BarkleyKinetics& kinetics, double dt,
                 double D0) {
  Simulator sim(stencil, kinetics, D0, dt);
  sim.load(state);
  sim.advance(1);
  return sim.state();
}

}  // namespace spiraldrift
