#pragma once

// Networks of subsystems coupled through static matrices w = M y (concrete)
// and wh = Mh yh (abstract). Storage functions of the components compose
// into a simulation function of the interconnection when
//
//   [W M; I]^T X(mu_1 X_1, ..., mu_N X_N) [W M; I] <= 0      (condition 5)
//   W M H = What Mh                                         (condition 6)
//
// with W, What, H the block-diagonal stacks of the component matrices.

#include <optional>
#include <vector>

#include "netabs/matgeo.hpp"
#include "netabs/storage.hpp"
#include "netabs/sysmodel.hpp"

namespace netabs {

struct Component {
  NonlinearControlSystem system;
  NonlinearControlSystem abstraction;
  StorageCertificate certificate;
};

struct InterconnectionSpec {
  std::vector<Component> components;
  Matrix M;  // (sum p_i) x (sum q2_i)

  std::size_t size() const { return components.size(); }
  /// Nonempty, M sized (sum p_i) x (sum q2_i), certificate blocks consistent.
  void validate() const;

  Matrix stacked_W() const;
  Matrix stacked_What() const;
  Matrix stacked_H() const;
};

/// Interleaved supply matrix [diag mu X11, diag mu X12; diag mu X21, diag mu X22].
Matrix assemble_X(const std::vector<StorageCertificate>& certs, const Vector& mu);

struct ConditionResult {
  bool holds = false;
  double value = 0.0;  // max eigenvalue (condition 5) or max-abs residual (condition 6)
};

ConditionResult check_condition5(const InterconnectionSpec& spec, const Vector& mu, const Tolerance& tol = {});
ConditionResult check_condition6(const InterconnectionSpec& spec, const Matrix& Mhat, const Tolerance& tol = {});

/// Least-norm Mh with What Mh = W M H; empty when im W M H is not inside im What.
std::optional<Matrix> solve_abstract_coupling(const InterconnectionSpec& spec, const Tolerance& tol = {});

/// Closed forms for quadratic alpha_i, linear eta_i and quadratic rho_i:
///   c_alpha = 1 / sum_i 1 / (mu_i c_alpha_i)    (the exact optimum of the
///            composed alpha problem; subsystems with zero output are skipped)
///   kappa   = min over mu_i > 0 of kappa_i
///   c_rho   = max_i mu_i c_rho_i
/// Throws ConditionsNotCertified when a subsystem with nonzero output has mu_i = 0.
ComparisonFunctions compose_comparison_functions(const std::vector<ComparisonFunctions>& parts, const Vector& mu,
                                                 const std::vector<bool>& has_output);

/// V(x, xh) = sum_i mu_i (x_i - P_i xh_i)^T Mhat_i (x_i - P_i xh_i) over stacked states.
class CompositeSimulationFunction {
 public:
  CompositeSimulationFunction(std::vector<Matrix> P, std::vector<Matrix> Mhat, Vector mu, ComparisonFunctions cf);

  double operator()(const Vector& x, const Vector& xh) const;
  const ComparisonFunctions& comparison() const { return cf_; }
  const Vector& mu() const { return mu_; }

 private:
  std::vector<Matrix> P_, Mhat_;
  Vector mu_;
  ComparisonFunctions cf_;
};

struct CompositionCertificate {
  Vector mu;
  Matrix Mhat_coupling;
  Matrix X_assembled;
  Matrix W, What, H;
  double condition5_margin = 0.0;
  double condition6_residual = 0.0;
  double definiteness_tol = 0.0;
  double residual_tol = 0.0;
  ComparisonFunctions composite_cf;

  bool passed() const {
    return condition5_margin <= definiteness_tol && condition6_residual <= residual_tol;
  }
};

/// Assembles the certificate; Mh is solved for when not supplied. When
/// condition 6 has no solution the least-squares Mh is kept and the
/// certificate does not pass.
CompositionCertificate certify_composition(const InterconnectionSpec& spec, const Vector& mu,
                                           const std::optional<Matrix>& Mhat = std::nullopt,
                                           const Tolerance& tol = {});

/// Throws ConditionsNotCertified unless both conditions hold.
CompositeSimulationFunction compose_simulation_function(const InterconnectionSpec& spec, const Vector& mu,
                                                        const Matrix& Mhat, const Tolerance& tol = {});

/// Sampled check of the composite dissipation inequality and output bound
/// along the coupled dynamics, each subsystem driven by its own interface.
VerificationReport verify_composite(const InterconnectionSpec& spec, const Vector& mu, const Matrix& Mhat,
                                    int samples = 10000, std::uint64_t seed = 1, const Tolerance& tol = {},
                                    double radius = 10.0);

/// Coordinate search over log-spaced weights for the mu minimizing the
/// condition-5 margin; mu_1 stays fixed at 1 since the condition is homogeneous.
Vector search_mu(const InterconnectionSpec& spec, int sweeps = 3, const Tolerance& tol = {});

}  // namespace netabs
