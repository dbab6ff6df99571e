#pragma once

// Feasibility search for the bar-variable certificate LMI with kappa_hat
// fixed, by alternating projections between the affine set that ties the
// slack matrix to the variables and the semidefinite cones. Only a success
// is meaningful: every returned certificate has been re-checked on the
// original (un-barred) inequality.

#include <optional>

#include "netabs/matgeo.hpp"
#include "netabs/storage.hpp"
#include "netabs/sysmodel.hpp"

namespace netabs {

struct LmiSolverOptions {
  double kappa_hat = 1.0;
  int max_iters = 500;
  double slack = 1e-6;       // strictness margin enforced on the slack matrix
  double mbar_floor = 1e-6;  // eigenvalue floor for Mbar
};

enum class LmiSolveStatus { Feasible, NonConvergence };

struct LmiSolveResult {
  LmiSolveStatus status = LmiSolveStatus::NonConvergence;
  int iterations = 0;
  double final_margin = 0.0;  // max eigenvalue of the bar LMI at the last iterate
  /// Engaged iff Feasible: Mhat, K, L1, Z (= D), W (= I), X blocks, kappa_hat.
  /// P, Q, L2, Rtilde, What, H are left empty.
  std::optional<StorageCertificate> certificate;
};

/// Requires C2 square and invertible (C2NotInvertible) and a finite slope
/// bound when the nonlinearity row is present. Z is fixed to D with W = I.
LmiSolveResult solve_restricted_lmi(const NonlinearControlSystem& sys, const LmiSolverOptions& options = {},
                                    const Tolerance& tol = {});

/// Bisection on kappa_hat in [lo, hi] for the largest value the solver certifies.
std::optional<LmiSolveResult> maximize_kappa_hat(const NonlinearControlSystem& sys, double lo, double hi,
                                                 int bisection_steps = 12, LmiSolverOptions options = {},
                                                 const Tolerance& tol = {});

}  // namespace netabs
