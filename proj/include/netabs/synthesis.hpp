#pragma once

// Construction of an abstraction (Ah, Bh, C1h, C2h, Dh, Eh, Fh, phi) of a
// system of the slope-restricted class together with a quadratic storage
// certificate and its interface.
//
// Pipeline order:
//   1. check the LMI certificate (Mhat, K, L1, Z, W, X) and D = Z W
//   2. validate the caller's injective P and the image conditions
//   3. Ah, Q from A P = P Ah - B Q
//   4. Eh, L2 from E = P Eh - B (L1 - L2)
//   5. Fh = F P, C1h = C1 P
//   6. C2h, H with X12 C2 P = X12 H C2h and X22 C2 P = X22 H C2h
//   7. Dh, What with P Dh = Z What
//   8. Bh free (identity by default) or behavior preserving [Ph B  Ph A G]
//   9. Rtilde minimizing rho_ext

#include <optional>
#include <string>
#include <vector>

#include "netabs/lmi_solver.hpp"
#include "netabs/matgeo.hpp"
#include "netabs/storage.hpp"
#include "netabs/sysmodel.hpp"

namespace netabs {

/// True when the certificate LMI carries the nonlinearity row: phi is
/// nonzero and either E or L1 is nonzero.
bool uses_nonlinearity_row(const NonlinearControlSystem& sys, const StorageCertificate& cert);

/// Left side minus right side of the certificate LMI; negative semidefinite
/// iff the LMI holds. The nonlinearity row/column is dropped when unused.
Matrix assumption1_matrix(const NonlinearControlSystem& sys, const StorageCertificate& cert);

/// D = Z W within residual tolerance, the LMI, Mhat > 0 and X22 <= 0.
VerificationReport check_assumption1(const NonlinearControlSystem& sys, const StorageCertificate& cert,
                                     const Tolerance& tol = {});

/// Congruence-transformed variables, linear in all unknowns once kappa_hat is fixed.
struct BarVariables {
  Matrix Mbar;    // Mhat^{-1}
  Matrix Kbar;    // K Mhat^{-1}
  Matrix L1;
  Matrix Z;
  Matrix Xbar22;  // Mhat^{-1} C2^T X22 C2 Mhat^{-1}
  Matrix Xbar21;  // Mhat^{-1} C2^T X21
  Matrix Xbar12;  // X12 C2 Mhat^{-1}
  Matrix X11;
};

BarVariables to_bar_lmi(const NonlinearControlSystem& sys, const StorageCertificate& cert, const Tolerance& tol = {});

/// Inverse transform; fills Mhat, K, L1, Z, X11, X12, X21, X22 of `base`.
StorageCertificate from_bar_lmi(const NonlinearControlSystem& sys, const BarVariables& bar,
                                StorageCertificate base = {}, const Tolerance& tol = {});

/// Left minus right side of the bar-variable LMI.
Matrix bar_lmi_matrix(const NonlinearControlSystem& sys, const BarVariables& bar, double kappa_hat,
                      bool with_nonlinearity_row);

/// Outcome of a constructive step: `value` is engaged iff the step is feasible.
template <class T>
struct Construction {
  std::optional<T> value;
  double residual = 0.0;
  double threshold = 0.0;
  bool feasible() const { return value.has_value(); }
};

struct AhatQ {
  Matrix Ahat;
  Matrix Q;
};

struct C2hatH {
  Matrix C2hat;
  Matrix H;
};

struct EhatL2 {
  Matrix Ehat;
  Matrix L2;
};

struct DhatWhat {
  Matrix Dhat;
  Matrix What;
};

/// Throws PNotInjective unless rank P = P.cols().
void require_injective(const Matrix& P, const Tolerance& tol = {});

/// A P = P Ah - B Q. Q is the least-norm correction needed outside im P
/// (zero whenever im AP ⊆ im P); Ah = P^+ (A P + B Q).
Construction<AhatQ> construct_Ahat_Q(const Matrix& A, const Matrix& B, const Matrix& P, const Tolerance& tol = {});

/// Solves for C2h given H. Without H: if X12 = X22 = 0 then H = 0 and
/// C2h = I; otherwise H = C2 P and C2h = I.
Construction<C2hatH> construct_C2hat_H(const Matrix& C2, const Matrix& P, const Matrix& X12, const Matrix& X22,
                                       const std::optional<Matrix>& H = std::nullopt, const Tolerance& tol = {});

/// E = P Eh - B (L1 - L2), with L2 - L1 the least-norm correction outside im P.
Construction<EhatL2> construct_Ehat_L2(const Matrix& E, const Matrix& P, const Matrix& B, const Matrix& L1,
                                       const Tolerance& tol = {});

/// P Dh = Z What. Without an override, What spans {v : Z v ∈ im P} and may
/// have zero columns; with an override the inclusion im Z What ⊆ im P is
/// checked.
Construction<DhatWhat> construct_Dhat_What(const Matrix& P, const Matrix& Z,
                                           const std::optional<Matrix>& What = std::nullopt,
                                           const Tolerance& tol = {});

struct BehaviorPreservation {
  Matrix Phat;  // nh x n, Phat P = I
  Matrix G;     // n x k
  Matrix T;     // k x n
  Matrix Bhat;  // nh x (m + k)
  double residual = 0.0;        // of the stacked left-inverse solve
  double trajectory_gap = 0.0;  // worst |z1 - z1h| over the verification runs
};

/// im P + ker M = R^n, decided as rank [P | ker M] = n.
bool spans_with_kernel(const Matrix& P, const Matrix& Mker, const Tolerance& tol = {});

/// Abstract input reproducing a concrete trajectory: [u - Q Ph x - (L1 - L2) phi(F x); T x].
Vector behavior_input(const NonlinearControlSystem& sys, const BehaviorPreservation& bp, const Matrix& Q,
                      const Matrix& L1, const Matrix& L2, const Vector& x, const Vector& u);

/// Simulates the concrete system under `u` (internal input zero) jointly
/// with the abstraction driven by `behavior_input`; returns max_t |z1 - z1h|.
double behavior_trajectory_gap(const NonlinearControlSystem& sys, const NonlinearControlSystem& abs_sys,
                               const BehaviorPreservation& bp, const Matrix& Q, const Matrix& L1, const Matrix& L2,
                               const Vector& x0, const SignalSpec& u, double horizon, double dt);

struct BehaviorOptions {
  int verification_runs = 5;
  double horizon = 5.0;
  double dt = 1e-3;
  double gap_tol = 1e-6;
  std::uint64_t seed = 7;
};

/// Ph from the stacked system Ph P = I, C1h Ph = C1, Fh Ph = F; G, T from
/// I - P Ph = G T; Bh = [Ph B  Ph A G]. Infeasible when a span condition
/// fails, NoCommonLeftInverse when the stacked solve leaves a residual.
BehaviorPreservation construct_Bhat_behavior(const NonlinearControlSystem& sys, const Matrix& P, const Matrix& Ahat,
                                             const Matrix& Q, const Matrix& Ehat, const Matrix& L1,
                                             const Matrix& L2, const BehaviorOptions& opts = {},
                                             const Tolerance& tol = {});

struct LogEntry {
  std::string step;
  double residual = 0.0;
};

enum class BhatMode { Free, BehaviorPreserving };

struct PipelineOptions {
  /// Mhat, K, L1, Z, W, X blocks, kappa_hat (pi optional). Solved for when absent.
  std::optional<StorageCertificate> certificate;
  LmiSolverOptions solver;
  std::optional<double> pi;
  std::optional<Matrix> H;
  std::optional<Matrix> What;
  BhatMode bhat_mode = BhatMode::Free;
  std::optional<Matrix> free_Bhat;  // default identity of size nh
  BehaviorOptions behavior;
};

struct AbstractionResult {
  NonlinearControlSystem abstract_system;
  StorageCertificate certificate;
  std::vector<LogEntry> construction_log;
  std::vector<std::string> warnings;
  std::optional<BehaviorPreservation> behavior;
};

/// Runs the construction in order; any infeasible step throws Error with
/// code Infeasible (or the step's own code) naming the step.
AbstractionResult table1_pipeline(const NonlinearControlSystem& sys, const Matrix& P,
                                  const PipelineOptions& options = {}, const Tolerance& tol = {});

/// Block-ones aggregation P = diag(1_{n_1}, ..., 1_{n_N}).
Matrix aggregation_P(const std::vector<Eigen::Index>& partition);

/// Real basis of the k slowest (largest real part) eigen-directions of A;
/// complex pairs contribute their real and imaginary parts.
Matrix dominant_eigenvector_P(const Matrix& A, Eigen::Index k, const Tolerance& tol = {});

/// Restricted-form duality checks: X12 = 0 and X11 >= Z^T Mhat Z / pi.
///
/// b = +inf: (A+BK)^T Mhat + Mhat (A+BK) < 0 and Mhat (B L1 + E) + F^T = 0.
/// b finite: the exact Schur complement of the restricted LMI (pass/fail),
/// the L2-gain form of the dual design problem, and a cross-check against
/// check_assumption1.
VerificationReport spr_duality_check(const NonlinearControlSystem& sys, const StorageCertificate& cert,
                                     const Tolerance& tol = {});

/// The L2-gain form: (A+BK+(b/2) g F)^T Mhat + Mhat (...) + (b/2) Mhat g g^T Mhat + (b/2) F^T F, g = B L1 + E.
Matrix l2_gain_dual_matrix(const NonlinearControlSystem& sys, const StorageCertificate& cert);

}  // namespace netabs
