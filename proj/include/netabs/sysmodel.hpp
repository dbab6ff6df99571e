#pragma once

// Control systems of the form
//
//   x' = A x + E phi(F x) + B u + D w,   z = C1 x,   y = C2 x
//
// with a single scalar slope-restricted nonlinearity phi, plus signal
// generators and fixed-step RK4 simulation of single systems and networks.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "netabs/matgeo.hpp"

namespace netabs {

enum class NonlinearityKind { Zero, Linear, Saturation, Tanh, Tabulated };

/// Scalar function with difference quotients in [slope_lower, slope_upper].
///
/// The evaluated value is base(r) - shift * r, where base is determined by
/// `kind`. `shift` is how slope normalization is represented without
/// changing the underlying shape.
class SlopeRestrictedFunction {
 public:
  static SlopeRestrictedFunction zero();
  static SlopeRestrictedFunction linear(double gain);
  /// clamp(r, -level, level); slopes in [0, 1].
  static SlopeRestrictedFunction saturation(double level);
  /// scale * tanh(r / scale); slopes in [0, 1].
  static SlopeRestrictedFunction tanh_like(double scale);
  /// Piecewise-linear through (r_k, v_k) with end segments extended.
  static SlopeRestrictedFunction tabulated(std::vector<std::pair<double, double>> breakpoints);

  double operator()(double r) const;

  NonlinearityKind kind() const { return kind_; }
  double parameter() const { return param_; }
  double shift() const { return shift_; }
  const std::vector<std::pair<double, double>>& breakpoints() const { return table_; }
  double slope_lower() const { return lower_; }
  double slope_upper() const { return upper_; }
  bool upper_is_infinite() const { return upper_ == std::numeric_limits<double>::infinity(); }

  /// Override the declared sector; requires a <= b and (b > 0 or b = +inf).
  SlopeRestrictedFunction with_bounds(double a, double b) const;
  /// Returns base(r) - (shift + a) r with bounds [lower - a, upper - a].
  SlopeRestrictedFunction shifted_by(double a) const;
  SlopeRestrictedFunction with_shift(double shift) const;

  bool is_zero() const { return kind_ == NonlinearityKind::Zero && shift_ == 0.0; }

  /// Empirical sector check over random pairs in [-range, range].
  bool satisfies_bounds(int samples, std::uint64_t seed, double range = 1e3, double slack = 1e-9) const;

 private:
  SlopeRestrictedFunction() = default;
  double base(double r) const;

  NonlinearityKind kind_ = NonlinearityKind::Zero;
  double param_ = 0.0;
  double shift_ = 0.0;
  double lower_ = 0.0;
  double upper_ = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> table_;
};

struct NonlinearControlSystem {
  Matrix A;  // n x n
  Matrix B;  // n x m
  Matrix C1; // q1 x n
  Matrix C2; // q2 x n
  Matrix D;  // n x p
  Matrix E;  // n x 1
  Matrix F;  // 1 x n
  SlopeRestrictedFunction phi = SlopeRestrictedFunction::zero();

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return D.cols(); }
  Eigen::Index q1() const { return C1.rows(); }
  Eigen::Index q2() const { return C2.rows(); }

  /// phi is not identically zero and E is nonzero.
  bool has_nonlinearity() const;

  /// Throws DimensionMismatch on any incompatible shape or non-finite entry.
  void validate() const;

  Vector drift(const Vector& x, const Vector& u, const Vector& w) const;

  /// Linear system (A, B, C1, C2, D) with E = 0, F = 0 and phi = zero.
  static NonlinearControlSystem linear(Matrix A, Matrix B, Matrix C1, Matrix C2, Matrix D);
};

/// Replace a nonzero lower slope a by 0: A + a E F and phi(r) - a r.
NonlinearControlSystem normalize_slope(const NonlinearControlSystem& sys);

enum class SignalKind { Zero, Constant, PiecewiseConstant, Sinusoid };

/// Input signals realized at desk scale.
struct SignalSpec {
  SignalKind kind = SignalKind::Zero;
  Eigen::Index dim = 0;
  Vector value;                                 // Constant
  std::vector<std::pair<double, Vector>> schedule;  // PiecewiseConstant: (start time, value), sorted
  Vector amplitude, frequency, phase;           // Sinusoid, per channel; value(t) = a sin(2 pi f t + phase)

  static SignalSpec zero(Eigen::Index dim);
  static SignalSpec constant(Vector v);
  static SignalSpec piecewise_constant(std::vector<std::pair<double, Vector>> schedule);
  static SignalSpec sinusoid(Vector amplitude, Vector frequency, Vector phase);

  Vector operator()(double t) const;
  /// sup over t of the Euclidean norm (exact for the catalogue kinds).
  double sup_norm() const;
  void validate() const;
};

/// Sampled trajectory on a uniform grid; column k of each matrix is time k.
struct Trajectory {
  Vector times;
  Matrix states;            // n x K
  Matrix external_input;    // m x K
  Matrix internal_input;    // p x K
  Matrix external_output;   // q1 x K
  Matrix internal_output;   // q2 x K

  Eigen::Index size() const { return times.size(); }
  std::string to_csv() const;
};

using VectorField = std::function<Vector(double, const Vector&)>;

/// Classic RK4 with `steps = round(T / dt)` uniform steps. Columns of the
/// result are the states at t_k = k * dt. Throws NonFiniteState when any
/// component exceeds 1e12 in magnitude or becomes non-finite.
Matrix integrate_rk4(const VectorField& f, const Vector& x0, double horizon, double dt);

Vector time_grid(double horizon, double dt);

Trajectory simulate(const NonlinearControlSystem& sys, const Vector& x0, const SignalSpec& u, const SignalSpec& w,
                    double horizon, double dt);

/// Fold the internal channels: w = M [C2_1 x_1; ...; C2_N x_N]. At most one
/// subsystem may carry a nonlinearity (the network keeps a single phi).
NonlinearControlSystem interconnect(const std::vector<NonlinearControlSystem>& subsystems, const Matrix& M);

/// Per-subsystem co-simulation: each subsystem is integrated with its own
/// drift and the internal inputs are substituted as w = M y at every stage.
/// Returns the stacked trajectory (internal input/output are the stacked
/// per-subsystem signals).
Trajectory cosimulate(const std::vector<NonlinearControlSystem>& subsystems, const Matrix& M,
                      const std::vector<Vector>& x0, const std::vector<SignalSpec>& u, double horizon, double dt);

}  // namespace netabs
