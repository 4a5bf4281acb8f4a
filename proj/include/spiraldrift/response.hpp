#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spiraldrift {

/// Samples of one multi-component field on the polar grid: component c is an
/// Nr x Ntheta block (row r_i, column theta_j).
using PolarBlock = Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PolarField = std::vector<PolarBlock>;

/// Disc of radius R with nodes r_i = i R / (Nr - 1) and theta_j = 2 pi j / Ntheta.
struct PolarGrid {
  int nr = 0;
  int ntheta = 0;
  double radius = 0.0;

  double r(int i) const { return radius * i / (nr - 1); }
  double theta(int j) const;
  double dr() const { return radius / (nr - 1); }
  bool operator==(const PolarGrid&) const = default;
};

/// Spiral solution, its derivatives and the response functions, as read from
/// a response-function file.
struct ResponseFunctionSet {
  PolarGrid grid;
  int components = 2;
  bool complex_valued = false;
  /// Normalization convention declared by the producer of the data.
  std::string normalization;
  PolarField u0, dtheta_u0, dx_u0, dy_u0;
  PolarField Ytheta, Yx, Yy;

  static constexpr std::array<const char*, 7> kFieldNames = {"u0",     "dtheta_u0", "dx_u0", "dy_u0",
                                                             "Ytheta", "Yx",        "Yy"};
  void validate() const;
};

/// Format:
///   spiraldrift-response 1
///   nr <Nr>
///   ntheta <Ntheta>
///   radius <R>
///   components <n>
///   scalar real|complex
///   normalization <token>
///   fields u0 dtheta_u0 dx_u0 dy_u0 Ytheta Yx Yy
///   end
/// followed by little-endian float64 data: for each field in the declared
/// order, for each component, Nr x Ntheta values row-major in r (complex
/// values as consecutive re, im pairs).
ResponseFunctionSet load_response_functions(const std::filesystem::path& path);
void save_response_functions(const std::filesystem::path& path, const ResponseFunctionSet& rf);

struct SourceTermFields {
  PolarGrid grid;
  PolarField SR;
  std::array<PolarField, 2> SdR;
};

/// S^R = (1/6) P (d_theta^2 u0 - r d_r u0),
/// S^dR_A = -(1/6) P rho_A r d_r u0 + (1/12) P rho_A d_theta^2 u0 + (1/24) P r^2 d_A u0,
/// with theta derivatives spectral and r derivatives fourth-order finite
/// differences of u0. `P` is the diagonal of the diffusion matrix.
SourceTermFields source_terms(const PolarGrid& grid, const PolarField& u0, const std::vector<double>& P);

/// d_theta^k of a block, spectrally along each ring.
PolarBlock theta_derivative(const PolarBlock& f, int order);
/// r d_r of a block with fourth-order differences (one-sided near the ends).
PolarBlock radial_derivative(const PolarGrid& grid, const PolarBlock& f);

/// <f|g> = integral of f^H g dS with dS = r dr dtheta, trapezoidal in r and
/// uniform in theta; summed over components.
std::complex<double> inner_product(const PolarGrid& grid, const PolarField& f, const PolarField& g);

/// Matrix of <Y^a|d_b u0> for a, b in (theta, x, y). For well-normalized data
/// it is diagonal; the diagonal carries the declared normalization.
Eigen::Matrix3cd biorthogonality(const ResponseFunctionSet& rf);

struct OverlapCoefficients {
  double q0 = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  /// Largest imaginary part among the three integrals.
  double max_imag = 0.0;
};

/// q0 = <Y^theta|S^R>, q1 = (1/2) <Y^A|S^dR_A>, q2 = (1/2) eps^A_B <Y^B|S^dR_A>.
OverlapCoefficients overlap_integrals(const ResponseFunctionSet& rf, const SourceTermFields& src);

}  // namespace spiraldrift
