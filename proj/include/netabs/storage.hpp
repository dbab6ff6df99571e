#pragma once

// Quadratic storage functions V(x, xh) = (x - P xh)^T Mhat (x - P xh) between a
// concrete system and its abstraction, the linear interface that refines
// abstract inputs, sampled verification of the dissipation inequality and the
// closed-form output error bound.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netabs/matgeo.hpp"
#include "netabs/sysmodel.hpp"

namespace netabs {

struct StorageCertificate {
  Matrix Mhat;    // n x n, symmetric positive definite
  Matrix P;       // n x nh
  Matrix K;       // m x n
  Matrix Q;       // m x nh
  Matrix L1;      // m x 1
  Matrix L2;      // m x 1
  Matrix Rtilde;  // m x mh
  Matrix Z;       // n x r
  Matrix W;       // r x p
  Matrix What;    // r x ph
  Matrix H;       // q2 x qh2
  Matrix X11;     // r x r
  Matrix X12;     // r x q2
  Matrix X21;     // q2 x r
  Matrix X22;     // q2 x q2, negative semidefinite
  double kappa_hat = 1.0;
  double pi = 0.5;  // 0 < pi < kappa_hat

  /// Full supply matrix [X11 X12; X21 X22].
  Matrix X() const;

  double value(const Vector& x, const Vector& xh) const;

  /// Mhat PD, X symmetric, X22 NSD, 0 < pi < kappa_hat. Throws CertificateInvalid.
  void validate(const Tolerance& tol = {}) const;
};

/// alpha(r) = c_alpha r^2, eta(s) = kappa s, rho_ext(s) = c_rho s^2.
struct ComparisonFunctions {
  double alpha_coeff = 1.0;
  double eta_coeff = 1.0;
  double rho_coeff = 0.0;

  double alpha(double r) const { return alpha_coeff * r * r; }
  double alpha_inverse(double s) const;
  double eta(double s) const { return eta_coeff * s; }
  double eta_inverse(double s) const { return s / eta_coeff; }
  double rho(double s) const { return rho_coeff * s * s; }
  /// Exponential decay s * exp(-kappa t), the comparison solution for linear eta.
  double decay(double s, double t) const;

  void validate() const;
};

struct CheckEntry {
  std::string check;
  double margin = 0.0;
  double tol = 0.0;
  bool passed = false;
  std::optional<std::vector<double>> witness;
};

struct VerificationReport {
  std::vector<CheckEntry> entries;

  bool passed() const;
  void add(std::string check, double margin, double tol, std::optional<std::vector<double>> witness = std::nullopt);
  /// Adds an entry whose pass/fail was decided by the caller.
  void add_decided(std::string check, double margin, double tol, bool ok,
                   std::optional<std::vector<double>> witness = std::nullopt);
  const CheckEntry* find(const std::string& check) const;
  void merge(const VerificationReport& other);
};

ComparisonFunctions derive_comparison_functions(const NonlinearControlSystem& sys, const NonlinearControlSystem& abs_sys,
                                                const StorageCertificate& cert, const Tolerance& tol = {});

/// u = K (x - P xh) + Q xh + Rtilde uh + L1 phi(F x) - L2 phi(F P xh).
Vector interface_input(const StorageCertificate& cert, const NonlinearControlSystem& sys, const Vector& x,
                       const Vector& xh, const Vector& uh);

/// Rtilde = (B^T Mhat B)^{-1} B^T Mhat P Bh; SingularGram when cond(B^T Mhat B) > 1e12.
Matrix compute_Rtilde(const Matrix& Mhat, const Matrix& P, const Matrix& B, const Matrix& Bh);

/// One point of the joint state/input space.
struct DissipationSample {
  Vector x, xh, uh, w, wh;
  std::vector<double> flatten() const;
};

struct DissipationTerms {
  double lhs = 0.0;     // grad V . [f; fh]
  double decay = 0.0;   // eta(V)
  double rho = 0.0;     // rho_ext(|uh|)
  double supply = 0.0;  // s^T X s
  double margin = 0.0;  // lhs - (-decay + rho + supply)
  double scale = 0.0;   // sum of absolute term magnitudes
  double output_gap = 0.0;  // alpha(|C1 x - C1h xh|) - V
  double output_scale = 0.0;
};

DissipationTerms evaluate_dissipation(const NonlinearControlSystem& sys, const NonlinearControlSystem& abs_sys,
                                      const StorageCertificate& cert, const ComparisonFunctions& cf,
                                      const DissipationSample& sample);

struct SamplingOptions {
  int samples = 10000;
  std::uint64_t seed = 1;
  double radius = 10.0;
};

/// Draws `samples` tuples from a seeded mixture: independent draws from the
/// radius ball, and draws near the matched set x = P xh (offset radius
/// log-uniform in [1e-6, radius]) with w, wh, uh zeroed or small.
std::vector<DissipationSample> draw_samples(const NonlinearControlSystem& sys, const NonlinearControlSystem& abs_sys,
                                            const Matrix& P, const SamplingOptions& opts);

/// Checks the dissipation inequality and the output lower bound at sampled points.
/// The comparison functions are derived from the certificate unless supplied.
VerificationReport verify_dissipation_inequality(const NonlinearControlSystem& sys,
                                                 const NonlinearControlSystem& abs_sys,
                                                 const StorageCertificate& cert, const SamplingOptions& opts = {},
                                                 const Tolerance& tol = {},
                                                 std::optional<ComparisonFunctions> cf = std::nullopt);

/// Output error bound at time t:
///   alpha^-1(2 decay(V0, t)) + alpha^-1(2 eta^-1(2 rho(uh_sup)))
/// with every factor 2 dropped when `use_half` (sound because alpha^-1 and
/// eta^-1 are subadditive for this class).
double error_bound(const ComparisonFunctions& cf, double V0, double uhat_sup, double t, bool use_half = true);

/// Inflation radius for a safe set: the bound's supremum over t, attained at t = 0.
double safe_set_inflation(const ComparisonFunctions& cf, double V0, double uhat_sup, bool use_half = true);

}  // namespace netabs
