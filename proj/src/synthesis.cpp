#include "netabs/synthesis.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace netabs {

namespace {

Matrix column_or_zero(const Matrix& M, Eigen::Index rows) {
  if (M.size() == 0) return Matrix::Zero(rows, 1);
  return M;
}

double two_over_b(const NonlinearControlSystem& sys) {
  return sys.phi.upper_is_infinite() ? 0.0 : 2.0 / sys.phi.slope_upper();
}

Matrix complement_projector(const Matrix& P, const Tolerance& tol) {
  return Matrix::Identity(P.rows(), P.rows()) - P * pseudoinverse(P, tol);
}

[[noreturn]] void step_failed(const std::string& step, const std::string& why, ErrorCode code = ErrorCode::Infeasible) {
  throw Error(code, step + ": " + why);
}

double relative_residual(double residual, double threshold, const Tolerance& tol) {
  return threshold > 0.0 ? residual * tol.residual / threshold : residual;
}

Matrix inverse_spd(const Matrix& S) {
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::CertificateInvalid, "matrix is not positive definite");
  return llt.solve(Matrix::Identity(S.rows(), S.cols()));
}

Matrix require_invertible_C2(const NonlinearControlSystem& sys, const Tolerance& tol) {
  if (sys.C2.rows() != sys.n() || numerical_rank(sys.C2, tol) < sys.n()) {
    throw Error(ErrorCode::C2NotInvertible, "the bar-variable form needs a square invertible C2");
  }
  return sys.C2.inverse();
}

}  // namespace

// ---------------------------------------------------------------------------

bool uses_nonlinearity_row(const NonlinearControlSystem& sys, const StorageCertificate& cert) {
  if (sys.phi.is_zero()) return false;
  const bool e_nonzero = sys.E.size() > 0 && max_abs(sys.E) > 0.0;
  const bool l1_nonzero = cert.L1.size() > 0 && max_abs(cert.L1) > 0.0;
  return e_nonzero || l1_nonzero;
}

Matrix assumption1_matrix(const NonlinearControlSystem& sys, const StorageCertificate& cert) {
  const auto n = sys.n();
  const auto r = cert.Z.cols();
  if (cert.Mhat.rows() != n || cert.Mhat.cols() != n || cert.K.rows() != sys.m() || cert.K.cols() != n ||
      cert.Z.rows() != n || cert.X11.rows() != r || cert.X22.rows() != sys.q2() || cert.X21.rows() != sys.q2() ||
      cert.X21.cols() != r) {
    throw Error(ErrorCode::DimensionMismatch, "certificate blocks do not match the system");
  }
  const bool row = uses_nonlinearity_row(sys, cert);
  const auto N = n + r + (row ? 1 : 0);
  const Matrix& M = cert.Mhat;
  const Matrix Acl = sys.A + sys.B * cert.K;

  Matrix out = Matrix::Zero(N, N);
  out.topLeftCorner(n, n) = Acl.transpose() * M + M * Acl + cert.kappa_hat * M -
                            sys.C2.transpose() * cert.X22 * sys.C2;
  const Matrix d12 = M * cert.Z - sys.C2.transpose() * cert.X21;
  out.block(0, n, n, r) = d12;
  out.block(n, 0, r, n) = d12.transpose();
  out.block(n, n, r, r) = -cert.X11;
  if (row) {
    const Matrix g = sys.B * column_or_zero(cert.L1, sys.m()) + sys.E;
    const Matrix d13 = M * g + sys.F.transpose();
    out.block(0, n + r, n, 1) = d13;
    out.block(n + r, 0, 1, n) = d13.transpose();
    out(n + r, n + r) = -two_over_b(sys);
  }
  return 0.5 * (out + out.transpose());
}

VerificationReport check_assumption1(const NonlinearControlSystem& sys, const StorageCertificate& cert,
                                     const Tolerance& tol) {
  VerificationReport report;
  if (cert.W.rows() != cert.Z.cols() || cert.W.cols() != sys.p()) {
    throw Error(ErrorCode::DimensionMismatch, "W must be r x p");
  }
  const double eq_res = (sys.D - cert.Z * cert.W).norm();
  report.add("D_eq_ZW", eq_res, tol.residual * (1.0 + sys.D.norm()));

  const auto nsd = check_negative_semidefinite(assumption1_matrix(sys, cert), tol);
  report.add("lmi", nsd.margin, tol.definiteness);

  const double lam = min_eigenvalue(cert.Mhat, tol);
  report.add_decided("Mhat_positive_definite", lam, tol.definiteness, lam > tol.definiteness);

  const double x22 = cert.X22.size() > 0 ? max_eigenvalue(cert.X22, tol) : 0.0;
  report.add("X22_negative_semidefinite", x22, tol.definiteness);
  return report;
}

// ---------------------------------------------------------------------------

BarVariables to_bar_lmi(const NonlinearControlSystem& sys, const StorageCertificate& cert, const Tolerance& tol) {
  require_invertible_C2(sys, tol);
  BarVariables bar;
  bar.Mbar = inverse_spd(symmetrized(cert.Mhat, tol));
  bar.Kbar = cert.K * bar.Mbar;
  bar.L1 = column_or_zero(cert.L1, sys.m());
  bar.Z = cert.Z;
  bar.Xbar22 = bar.Mbar * sys.C2.transpose() * cert.X22 * sys.C2 * bar.Mbar;
  bar.Xbar22 = 0.5 * (bar.Xbar22 + bar.Xbar22.transpose());
  bar.Xbar21 = bar.Mbar * sys.C2.transpose() * cert.X21;
  bar.Xbar12 = cert.X12 * sys.C2 * bar.Mbar;
  bar.X11 = cert.X11;
  return bar;
}

StorageCertificate from_bar_lmi(const NonlinearControlSystem& sys, const BarVariables& bar, StorageCertificate base,
                                const Tolerance& tol) {
  const Matrix C2inv = require_invertible_C2(sys, tol);
  const Matrix Mhat = inverse_spd(symmetrized(bar.Mbar, tol));
  base.Mhat = 0.5 * (Mhat + Mhat.transpose());
  base.K = bar.Kbar * base.Mhat;
  base.L1 = bar.L1;
  base.Z = bar.Z;
  base.X11 = bar.X11;
  const Matrix X22 = C2inv.transpose() * base.Mhat * bar.Xbar22 * base.Mhat * C2inv;
  base.X22 = 0.5 * (X22 + X22.transpose());
  base.X21 = C2inv.transpose() * base.Mhat * bar.Xbar21;
  base.X12 = bar.Xbar12 * base.Mhat * C2inv;
  return base;
}

Matrix bar_lmi_matrix(const NonlinearControlSystem& sys, const BarVariables& bar, double kappa_hat,
                      bool with_nonlinearity_row) {
  const auto n = sys.n();
  const auto r = bar.Z.cols();
  const auto N = n + r + (with_nonlinearity_row ? 1 : 0);
  Matrix out = Matrix::Zero(N, N);
  const Matrix AM = sys.A * bar.Mbar + sys.B * bar.Kbar;
  out.topLeftCorner(n, n) = AM + AM.transpose() + kappa_hat * bar.Mbar - bar.Xbar22;
  const Matrix d12 = bar.Z - bar.Xbar21;
  out.block(0, n, n, r) = d12;
  out.block(n, 0, r, n) = d12.transpose();
  out.block(n, n, r, r) = -bar.X11;
  if (with_nonlinearity_row) {
    const Matrix d13 = sys.B * column_or_zero(bar.L1, sys.m()) + sys.E + bar.Mbar * sys.F.transpose();
    out.block(0, n + r, n, 1) = d13;
    out.block(n + r, 0, 1, n) = d13.transpose();
    out(n + r, n + r) = -two_over_b(sys);
  }
  return 0.5 * (out + out.transpose());
}

// ---------------------------------------------------------------------------

void require_injective(const Matrix& P, const Tolerance& tol) {
  if (P.cols() == 0 || numerical_rank(P, tol) < P.cols()) {
    throw Error(ErrorCode::PNotInjective, "P must have full column rank");
  }
}

Construction<AhatQ> construct_Ahat_Q(const Matrix& A, const Matrix& B, const Matrix& P, const Tolerance& tol) {
  require_injective(P, tol);
  if (A.rows() != P.rows() || A.cols() != P.rows() || B.rows() != P.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "construct_Ahat_Q dimension mismatch");
  }
  const Matrix AP = A * P;
  const Matrix Pi = complement_projector(P, tol);
  Construction<AhatQ> out;

  Matrix Q = Matrix::Zero(B.cols(), P.cols());
  const Matrix outside = Pi * AP;
  if (B.cols() > 0) {
    const FactorSolution q = solve_factor(-outside, Pi * B, tol);
    out.residual = q.residual;
    out.threshold = q.threshold;
    if (!q.feasible()) return out;
    Q = *q.G;
  } else {
    out.residual = outside.norm();
    out.threshold = tol.residual * (1.0 + AP.norm());
    if (out.residual > out.threshold) return out;
  }
  const FactorSolution ah = solve_factor(AP + B * Q, P, tol);
  out.residual = std::max(out.residual, ah.residual);
  out.threshold = std::max(out.threshold, ah.threshold);
  if (!ah.feasible()) return out;
  out.value = AhatQ{*ah.G, Q};
  return out;
}

Construction<C2hatH> construct_C2hat_H(const Matrix& C2, const Matrix& P, const Matrix& X12, const Matrix& X22,
                                       const std::optional<Matrix>& H, const Tolerance& tol) {
  const auto nh = P.cols();
  Construction<C2hatH> out;
  const Matrix S = vertical_concat(X12, X22);
  const Matrix target = S * C2 * P;

  if (!H) {
    if (S.size() == 0 || max_abs(S) == 0.0) {
      out.value = C2hatH{Matrix::Identity(nh, nh), Matrix::Zero(C2.rows(), nh)};
      return out;
    }
    const Matrix Hd = C2 * P;
    out.value = C2hatH{Matrix::Identity(nh, nh), Hd};
    return out;
  }
  if (H->rows() != C2.rows()) throw Error(ErrorCode::DimensionMismatch, "H must have q2 rows");
  const FactorSolution c = solve_factor(target, S * *H, tol);
  out.residual = c.residual;
  out.threshold = c.threshold;
  if (!c.feasible()) return out;
  out.value = C2hatH{*c.G, *H};
  return out;
}

Construction<EhatL2> construct_Ehat_L2(const Matrix& E, const Matrix& P, const Matrix& B, const Matrix& L1,
                                       const Tolerance& tol) {
  require_injective(P, tol);
  const Matrix L1c = column_or_zero(L1, B.cols());
  Construction<EhatL2> out;
  if (E.size() == 0 || max_abs(E) == 0.0) {
    out.value = EhatL2{Matrix::Zero(P.cols(), 1), L1c};
    return out;
  }
  const Matrix Pi = complement_projector(P, tol);
  Matrix delta = Matrix::Zero(B.cols(), E.cols());
  if (B.cols() > 0) {
    const FactorSolution d = solve_factor(Pi * E, Pi * B, tol);
    out.residual = d.residual;
    out.threshold = d.threshold;
    if (!d.feasible()) return out;
    delta = *d.G;
  } else {
    out.residual = (Pi * E).norm();
    out.threshold = tol.residual * (1.0 + E.norm());
    if (out.residual > out.threshold) return out;
  }
  const FactorSolution eh = solve_factor(E - B * delta, P, tol);
  out.residual = std::max(out.residual, eh.residual);
  out.threshold = std::max(out.threshold, eh.threshold);
  if (!eh.feasible()) return out;
  out.value = EhatL2{*eh.G, L1c + delta};
  return out;
}

Construction<DhatWhat> construct_Dhat_What(const Matrix& P, const Matrix& Z, const std::optional<Matrix>& What,
                                           const Tolerance& tol) {
  require_injective(P, tol);
  if (Z.rows() != P.rows()) throw Error(ErrorCode::DimensionMismatch, "Z must have n rows");
  Construction<DhatWhat> out;
  Matrix Wh;
  if (What) {
    if (What->rows() != Z.cols()) throw Error(ErrorCode::DimensionMismatch, "What must have r rows");
    Wh = *What;
  } else {
    Wh = kernel_basis(complement_projector(P, tol) * Z, tol);
  }
  const Matrix ZW = Z * Wh;
  if (ZW.cols() == 0) {
    out.value = DhatWhat{Matrix::Zero(P.cols(), 0), Wh};
    return out;
  }
  const FactorSolution d = solve_factor(ZW, P, tol);
  out.residual = d.residual;
  out.threshold = d.threshold;
  if (!d.feasible()) return out;
  out.value = DhatWhat{*d.G, Wh};
  return out;
}

// ---------------------------------------------------------------------------

bool spans_with_kernel(const Matrix& P, const Matrix& Mker, const Tolerance& tol) {
  return numerical_rank(horizontal_concat(P, Mker), tol) == P.rows();
}

Vector behavior_input(const NonlinearControlSystem& sys, const BehaviorPreservation& bp, const Matrix& Q,
                      const Matrix& L1, const Matrix& L2, const Vector& x, const Vector& u) {
  const auto m = sys.m();
  const auto k = bp.T.rows();
  Vector uh(m + k);
  Vector head = u - Q * (bp.Phat * x);
  if (!sys.phi.is_zero() && m > 0) {
    head -= (column_or_zero(L1, m) - column_or_zero(L2, m)).col(0) * sys.phi((sys.F * x)(0));
  }
  uh.head(m) = head;
  if (k > 0) uh.tail(k) = bp.T * x;
  return uh;
}

double behavior_trajectory_gap(const NonlinearControlSystem& sys, const NonlinearControlSystem& abs_sys,
                               const BehaviorPreservation& bp, const Matrix& Q, const Matrix& L1, const Matrix& L2,
                               const Vector& x0, const SignalSpec& u, double horizon, double dt) {
  const auto n = sys.n();
  const auto nh = abs_sys.n();
  const Vector w0 = Vector::Zero(sys.p());
  const Vector wh0 = Vector::Zero(abs_sys.p());
  VectorField f = [&](double t, const Vector& s) {
    const Vector x = s.head(n);
    const Vector xh = s.tail(nh);
    const Vector ut = u(t);
    Vector ds(n + nh);
    ds.head(n) = sys.drift(x, ut, w0);
    ds.tail(nh) = abs_sys.drift(xh, behavior_input(sys, bp, Q, L1, L2, x, ut), wh0);
    return ds;
  };
  Vector s0(n + nh);
  s0.head(n) = x0;
  s0.tail(nh) = bp.Phat * x0;
  const Matrix traj = integrate_rk4(f, s0, horizon, dt);
  double gap = 0.0;
  for (Eigen::Index k = 0; k < traj.cols(); ++k) {
    const Vector z = sys.C1 * traj.col(k).head(n);
    const Vector zh = abs_sys.C1 * traj.col(k).tail(nh);
    gap = std::max(gap, (z - zh).norm());
  }
  return gap;
}

BehaviorPreservation construct_Bhat_behavior(const NonlinearControlSystem& sys, const Matrix& P, const Matrix& Ahat,
                                             const Matrix& Q, const Matrix& Ehat, const Matrix& L1,
                                             const Matrix& L2, const BehaviorOptions& opts, const Tolerance& tol) {
  require_injective(P, tol);
  const auto n = sys.n();
  const auto nh = P.cols();
  const bool with_phi = sys.has_nonlinearity();

  if (!spans_with_kernel(P, kernel_basis(sys.C1, tol), tol)) {
    step_failed("Bhat_behavior", "im P + ker C1 does not span the state space");
  }
  if (with_phi && !spans_with_kernel(P, kernel_basis(sys.F, tol), tol)) {
    step_failed("Bhat_behavior", "im P + ker F does not span the state space");
  }

  // Unknown vec(Ph) (column-major, nh x n); equations stacked row-wise.
  const Matrix C1h = sys.C1 * P;
  const Matrix Fh = sys.F * P;
  const Matrix In = Matrix::Identity(n, n);
  std::vector<Matrix> rows;
  std::vector<Matrix> rhs;
  rows.push_back(Eigen::kroneckerProduct(P.transpose(), Matrix::Identity(nh, nh)));
  rhs.push_back(Eigen::Map<const Vector>(Matrix::Identity(nh, nh).eval().data(), nh * nh));
  auto add_output = [&](const Matrix& Mh, const Matrix& Mfull) {
    if (Mh.rows() == 0) return;
    rows.push_back(Eigen::kroneckerProduct(In, Mh));
    const Matrix copy = Mfull;
    rhs.push_back(Eigen::Map<const Vector>(copy.data(), copy.size()));
  };
  add_output(C1h, sys.C1);
  if (with_phi) add_output(Fh, sys.F);

  Eigen::Index total = 0;
  for (const auto& r : rows) total += r.rows();
  Matrix big(total, nh * n);
  Vector b(total);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    big.middleRows(at, rows[i].rows()) = rows[i];
    b.segment(at, rows[i].rows()) = rhs[i];
    at += rows[i].rows();
  }
  const FactorSolution sol = solve_factor(b, big, tol);
  if (!sol.feasible()) {
    std::ostringstream os;
    os << "no left inverse of P is compatible with C1 and F (residual " << sol.residual << ")";
    throw Error(ErrorCode::NoCommonLeftInverse, os.str());
  }
  BehaviorPreservation bp;
  bp.Phat = Eigen::Map<const Matrix>(sol.G->data(), nh, n);
  bp.residual = relative_residual(sol.residual, sol.threshold, tol);
  const Matrix rest = In - P * bp.Phat;
  // rest is a projector of rank n - nh; take that many directions so roundoff is not mistaken for rank.
  {
    Eigen::JacobiSVD<Matrix> svd(rest, Eigen::ComputeFullU);
    bp.G = svd.matrixU().leftCols(n - nh);
  }
  bp.T = bp.G.transpose() * rest;
  bp.Bhat = horizontal_concat(bp.Phat * sys.B, bp.Phat * sys.A * bp.G);

  NonlinearControlSystem abs_sys;
  abs_sys.A = Ahat;
  abs_sys.B = bp.Bhat;
  abs_sys.C1 = C1h;
  abs_sys.C2 = Matrix::Zero(0, nh);
  abs_sys.D = Matrix::Zero(nh, 0);
  abs_sys.E = column_or_zero(Ehat, nh);
  abs_sys.F = Fh;
  abs_sys.phi = sys.phi;

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int run = 0; run < opts.verification_runs; ++run) {
    Vector x0(n);
    for (Eigen::Index i = 0; i < n; ++i) x0(i) = gauss(rng);
    const auto m = sys.m();
    Vector amp(m), freq(m), phase(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      amp(i) = 0.5 + 1.5 * unif(rng);
      freq(i) = 0.1 + 0.9 * unif(rng);
      phase(i) = 2.0 * std::numbers::pi * unif(rng);
    }
    const SignalSpec u = m > 0 ? SignalSpec::sinusoid(amp, freq, phase) : SignalSpec::zero(0);
    const double gap = behavior_trajectory_gap(sys, abs_sys, bp, Q, L1, L2, x0, u, opts.horizon, opts.dt);
    bp.trajectory_gap = std::max(bp.trajectory_gap, gap);
  }
  if (bp.trajectory_gap > opts.gap_tol) {
    std::ostringstream os;
    os << "output trajectories differ by " << bp.trajectory_gap;
    step_failed("Bhat_behavior", os.str());
  }
  return bp;
}

// ---------------------------------------------------------------------------

AbstractionResult table1_pipeline(const NonlinearControlSystem& sys, const Matrix& P, const PipelineOptions& options,
                                  const Tolerance& tol) {
  sys.validate();
  if (P.rows() != sys.n()) throw Error(ErrorCode::DimensionMismatch, "P must have n rows");
  AbstractionResult result;
  auto& log = result.construction_log;

  // Certificate matrices.
  StorageCertificate cert;
  if (options.certificate) {
    cert = *options.certificate;
  } else {
    const LmiSolveResult solved = solve_restricted_lmi(sys, options.solver, tol);
    if (solved.status != LmiSolveStatus::Feasible) {
      std::ostringstream os;
      os << "restricted LMI solver did not converge after " << solved.iterations << " iterations";
      step_failed("assumption1", os.str());
    }
    cert = *solved.certificate;
    log.push_back({"lmi_solver", 0.0});
  }
  cert.L1 = column_or_zero(cert.L1, sys.m());
  if (options.pi) cert.pi = *options.pi;
  const VerificationReport a1 = check_assumption1(sys, cert, tol);
  for (const auto& e : a1.entries) {
    if (!e.passed) {
      std::ostringstream os;
      os << e.check << " fails (margin " << e.margin << ", tol " << e.tol << ")";
      step_failed("assumption1", os.str());
    }
  }
  log.push_back({"D_eq_ZW", relative_residual(a1.find("D_eq_ZW")->margin, a1.find("D_eq_ZW")->tol, tol)});
  log.push_back({"lmi", std::max(0.0, a1.find("lmi")->margin)});

  // P.
  require_injective(P, tol);
  log.push_back({"P_injective", 0.0});
  const auto nh = P.cols();

  const auto aq = construct_Ahat_Q(sys.A, sys.B, P, tol);
  if (!aq.feasible()) step_failed("Ahat_Q", "im AP is not contained in im P + im B");
  log.push_back({"Ahat_Q", relative_residual(aq.residual, aq.threshold, tol)});

  EhatL2 el{Matrix::Zero(nh, 1), cert.L1};
  if (sys.phi.is_zero()) {
    log.push_back({"Ehat_L2 skipped", 0.0});
  } else {
    const auto c = construct_Ehat_L2(sys.E, P, sys.B, cert.L1, tol);
    if (!c.feasible()) step_failed("Ehat_L2", "im E is not contained in im P + im B");
    el = *c.value;
    log.push_back({"Ehat_L2", relative_residual(c.residual, c.threshold, tol)});
  }

  const Matrix Fh = sys.F * P;
  const Matrix C1h = sys.C1 * P;
  log.push_back({"Fhat", 0.0});
  log.push_back({"C1hat", 0.0});

  const auto ch = construct_C2hat_H(sys.C2, P, cert.X12, cert.X22, options.H, tol);
  if (!ch.feasible()) step_failed("C2hat_H", "im X12 C2 P / X22 C2 P not reachable through H");
  log.push_back({"C2hat_H", relative_residual(ch.residual, ch.threshold, tol)});

  const auto dw = construct_Dhat_What(P, cert.Z, options.What, tol);
  if (!dw.feasible()) step_failed("Dhat_What", "im Z What is not contained in im P");
  log.push_back({"Dhat_What", relative_residual(dw.residual, dw.threshold, tol)});
  if (dw.value->What.cols() == 0 && cert.Z.cols() > 0) {
    result.warnings.push_back("What has no columns: the abstraction has no internal input");
  }

  Matrix Bhat;
  if (options.bhat_mode == BhatMode::Free) {
    Bhat = options.free_Bhat ? *options.free_Bhat : Matrix::Identity(nh, nh);
    if (Bhat.rows() != nh) throw Error(ErrorCode::DimensionMismatch, "free Bhat must have nh rows");
    log.push_back({"Bhat_free", 0.0});
  } else {
    BehaviorPreservation bp = construct_Bhat_behavior(sys, P, aq.value->Ahat, aq.value->Q, el.Ehat, cert.L1, el.L2,
                                                      options.behavior, tol);
    Bhat = bp.Bhat;
    log.push_back({"Bhat_behavior", bp.residual});
    result.behavior = std::move(bp);
  }

  cert.P = P;
  cert.Q = aq.value->Q;
  cert.L2 = el.L2;
  cert.H = ch.value->H;
  cert.What = dw.value->What;
  cert.Rtilde = compute_Rtilde(cert.Mhat, P, sys.B, Bhat);
  log.push_back({"Rtilde", 0.0});

  NonlinearControlSystem& abs_sys = result.abstract_system;
  abs_sys.A = aq.value->Ahat;
  abs_sys.B = Bhat;
  abs_sys.C1 = C1h;
  abs_sys.C2 = ch.value->C2hat;
  abs_sys.D = dw.value->Dhat;
  abs_sys.E = el.Ehat;
  abs_sys.F = Fh;
  abs_sys.phi = sys.phi;
  abs_sys.validate();

  cert.validate(tol);
  result.certificate = std::move(cert);
  return result;
}

// ---------------------------------------------------------------------------

Matrix aggregation_P(const std::vector<Eigen::Index>& partition) {
  std::vector<Matrix> blocks;
  for (auto size : partition) {
    if (size <= 0) throw Error(ErrorCode::BadDescriptor, "partition blocks must be positive");
    blocks.push_back(ones(size, 1));
  }
  return block_diagonal(blocks);
}

Matrix dominant_eigenvector_P(const Matrix& A, Eigen::Index k, const Tolerance& tol) {
  if (A.rows() != A.cols() || k <= 0 || k > A.rows()) throw Error(ErrorCode::DimensionMismatch, "bad eigenvector request");
  Eigen::EigenSolver<Matrix> es(A);
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(A.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return vals(i).real() > vals(j).real(); });

  std::vector<Vector> cols;
  for (auto i : order) {
    if (static_cast<Eigen::Index>(cols.size()) >= k) break;
    if (vals(i).imag() < 0.0) continue;  // conjugate handled with its partner
    cols.push_back(vecs.col(i).real());
    if (vals(i).imag() > 0.0 && static_cast<Eigen::Index>(cols.size()) < k) cols.push_back(vecs.col(i).imag());
  }
  Matrix raw(A.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) raw.col(static_cast<Eigen::Index>(c)) = cols[c];
  const Matrix basis = image_basis(raw, tol);
  if (basis.cols() < k) throw Error(ErrorCode::PNotInjective, "eigenvector template is rank deficient");
  return basis;
}

// ---------------------------------------------------------------------------

Matrix l2_gain_dual_matrix(const NonlinearControlSystem& sys, const StorageCertificate& cert) {
  const Matrix& M = cert.Mhat;
  const double half_b = sys.phi.slope_upper() / 2.0;
  const Matrix g = sys.B * column_or_zero(cert.L1, sys.m()) + sys.E;
  const Matrix Ac = sys.A + sys.B * cert.K + half_b * g * sys.F;
  const Matrix out = Ac.transpose() * M + M * Ac + half_b * M * g * g.transpose() * M +
                     half_b * sys.F.transpose() * sys.F;
  return 0.5 * (out + out.transpose());
}

VerificationReport spr_duality_check(const NonlinearControlSystem& sys, const StorageCertificate& cert,
                                     const Tolerance& tol) {
  const Matrix& M = cert.Mhat;
  const double x12 = cert.X12.size() > 0 ? max_abs(cert.X12) : 0.0;
  if (x12 > tol.residual * (1.0 + (cert.X11.size() > 0 ? max_abs(cert.X11) : 0.0))) {
    throw Error(ErrorCode::NotRestrictedForm, "restricted form needs X12 = 0");
  }
  if (cert.Z.cols() > 0) {
    const Matrix floor = cert.Z.transpose() * M * cert.Z / cert.pi;
    if (min_eigenvalue(cert.X11 - floor, tol) < -tol.definiteness) {
      throw Error(ErrorCode::NotRestrictedForm, "restricted form needs X11 >= Z^T Mhat Z / pi");
    }
  }

  VerificationReport report;
  const Matrix Acl = sys.A + sys.B * cert.K;
  const Matrix g = sys.B * column_or_zero(cert.L1, sys.m()) + sys.E;

  if (sys.phi.upper_is_infinite()) {
    const double lyap = max_eigenvalue(Acl.transpose() * M + M * Acl, tol);
    report.add_decided("strict_decrease", lyap, -tol.definiteness, lyap < -tol.definiteness);
    const Matrix coupling = M * g + sys.F.transpose();
    report.add("output_coupling", max_abs(coupling),
               tol.residual * (1.0 + max_abs(M * g) + max_abs(sys.F)));
    return report;
  }

  // Exact Schur complement of the restricted LMI w.r.t. its trailing blocks.
  const Matrix delta = assumption1_matrix(sys, cert);
  const auto n = sys.n();
  const auto tail = delta.rows() - n;
  Matrix schur = delta.topLeftCorner(n, n);
  double tail_margin = 0.0;
  if (tail > 0) {
    const Matrix Dtt = delta.bottomRightCorner(tail, tail);
    const Matrix Dht = delta.topRightCorner(n, tail);
    schur -= Dht * pseudoinverse(Dtt, tol) * Dht.transpose();
    tail_margin = max_eigenvalue(Dtt, tol);
  }
  const double exact = std::max(max_eigenvalue(schur, tol), tail_margin);
  const bool exact_ok = exact <= tol.definiteness;
  report.add("restricted_schur", exact, tol.definiteness);

  // The L2-gain form drops the positive terms kappa_hat Mhat, -C2^T X22 C2
  // and Mhat Z X11^+ Z^T Mhat, so it is necessary but not sufficient.
  const double dual = uses_nonlinearity_row(sys, cert) ? max_eigenvalue(l2_gain_dual_matrix(sys, cert), tol)
                                                       : max_eigenvalue(Acl.transpose() * M + M * Acl, tol);
  report.add_decided("l2_gain_dual", dual, 0.0, dual < 0.0);

  const auto direct = check_negative_semidefinite(delta, tol);
  report.add_decided("assumption1_agreement", direct.margin, tol.definiteness, direct.holds == exact_ok);
  return report;
}

}  // namespace netabs
