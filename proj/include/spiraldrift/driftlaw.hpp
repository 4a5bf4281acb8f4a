#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "spiraldrift/geometry.hpp"

namespace spiraldrift {

struct MobilityCoefficients {
  double q0 = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  double omega0 = 0.0;
  /// +1 counterclockwise, -1 clockwise.
  int chirality = 1;

  /// Coefficients for the opposite rotation sense: q1 and q0 unchanged, q2 negated.
  MobilityCoefficients mirrored() const;
  /// Coefficients expressed for `target` chirality.
  MobilityCoefficients for_chirality(int target) const;
};

struct DriftPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

enum class DriftStatus { Completed, ExitedDomain };

struct DriftPath {
  std::vector<DriftPoint> points;
  double step = 0.0;
  int order = 4;
  DriftStatus status = DriftStatus::Completed;
};

/// Curvature data behind the drift law: closed-form through nested duals when
/// the surface has one, bicubic interpolation of a sampled MetricField
/// otherwise.
class RicciField {
 public:
  explicit RicciField(SurfaceSpec spec);
  explicit RicciField(MetricField metric);
  /// Uses the closed form when `spec` is analytic, otherwise samples it.
  static RicciField from_spec(const SurfaceSpec& spec, DerivativeMode mode = DerivativeMode::Auto);

  bool analytic() const { return spec_.has_value(); }
  bool contains(double x, double y) const;
  /// Throws std::out_of_range outside the domain.
  CurvatureSample at(double x, double y) const;
  double xmin() const { return xmin_; }
  double xmax() const { return xmax_; }
  double ymin() const { return ymin_; }
  double ymax() const { return ymax_; }

 private:
  std::optional<SurfaceSpec> spec_;
  std::optional<MetricField> metric_;
  double xmin_ = 0.0, xmax_ = 0.0, ymin_ = 0.0, ymax_ = 0.0;
};

/// Keys cubic-convolution interpolation (a = -1/2) of a grid field with its
/// first derivatives. Indices are clamped at the edge.
struct BicubicSample {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
};
BicubicSample bicubic(const GridGeometry& grid, const Field& f, double x, double y);

/// X^A = -q1 g^AB d_B R - q2 g^(-1/2) eps^BA d_B R, eps^12 = +1.
Eigen::Vector2d eom_velocity(const CurvatureSample& c, const MobilityCoefficients& q);
Eigen::Vector2d eom_velocity(const RicciField& field, double x, double y, const MobilityCoefficients& q);

/// Same law written with the fiber frame: the gradient of R on the embedded
/// (isotropic) surface, projected on e_L and e_T and rotated about e_N.
/// `slope` is (d_x f, d_y f) and `dR` the chart derivatives d_A R.
Eigen::Vector2d eom_velocity_fiber_form(const Eigen::Vector2d& slope, const FiberFrame<double>& frame,
                                        const Eigen::Vector2d& dR, double dL, double dT,
                                        const MobilityCoefficients& q);
/// Fiber form at a point of an analytic surface.
Eigen::Vector2d eom_velocity_fiber_form(const SurfaceSpec& spec, double x, double y, const MobilityCoefficients& q);

struct IntegrateOptions {
  /// Output spacing in time; 0 records every accepted step.
  double sample_dt = 1.0;
  /// Endpoint change allowed when halving the step.
  double tolerance = 1e-8;
  /// Initial step; 0 picks t_end / 64.
  double initial_step = 0.0;
  int max_halvings = 20;
  /// Distance from the domain edge at which the path is truncated.
  double margin = 0.0;
};

/// Classic fourth-order Runge-Kutta with fixed steps, halved until the
/// endpoint moves less than the tolerance.
DriftPath integrate_drift(const Eigen::Vector2d& x0, double t_end, const RicciField& field,
                          const MobilityCoefficients& q, const IntegrateOptions& options = {});

/// omega = omega0 + q0 R.
double rotation_frequency(double R, const MobilityCoefficients& q);

/// Returned by the closed forms when q1 = 0: the spiral circles along a level
/// set of R, so the trajectory is not a graph over r or z.
struct PureTransverseDrift {};

/// phi(r) = (q2/q1)(s - arccoth s) + C1 with s = sqrt(1 + 4 A^2 r^2).
std::variant<double, PureTransverseDrift> paraboloid_trajectory(double r, double A, double q1, double q2,
                                                                double C1);
/// C1 placing the closed-form path through (r0, phi0).
double paraboloid_constant(double r0, double phi0, double A, double q1, double q2);

/// Path on the plane with alpha = B (x + y), as (x, y) for z = x + y:
/// W(z) = ln[(dL-dT) sin 2a + dL + dT] / (2B) - (q2/(q1 B)) atan[((dL+dT) tan a + dL - dT) / (2 sqrt(dL dT))] + C2,
/// x = (z + W)/2, y = (z - W)/2. The arctangent is continued across the
/// poles of tan a so W is continuous in z.
std::variant<Eigen::Vector2d, PureTransverseDrift> planar_trajectory(double z, double B, double dL, double dT,
                                                                     double q1, double q2, double C2);
/// dW/dz of the planar closed form.
double planar_slope(double z, double B, double dL, double dT, double q1, double q2);
/// C2 placing the closed-form path through (x0, y0).
double planar_constant(const Eigen::Vector2d& start, double B, double dL, double dT, double q1, double q2);

std::string to_string(DriftStatus s);

}  // namespace spiraldrift
