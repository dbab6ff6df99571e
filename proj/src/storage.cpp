#include "netabs/storage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace netabs {

namespace {

constexpr double kGramConditionLimit = 1e12;

void invalid(const std::string& what) { throw Error(ErrorCode::CertificateInvalid, what); }

Vector sample_ball(std::mt19937_64& rng, Eigen::Index dim, double radius) {
  if (dim == 0) return Vector(0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = gauss(rng);
  const double nrm = v.norm();
  if (nrm == 0.0) return Vector::Zero(dim);
  const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(dim));
  return v * (r / nrm);
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> unif(std::log10(lo), std::log10(hi));
  return std::pow(10.0, unif(rng));
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix StorageCertificate::X() const {
  const auto r = X11.rows();
  const auto q = X22.rows();
  Matrix out(r + q, r + q);
  out.topLeftCorner(r, r) = X11;
  out.topRightCorner(r, q) = X12;
  out.bottomLeftCorner(q, r) = X21;
  out.bottomRightCorner(q, q) = X22;
  return out;
}

double StorageCertificate::value(const Vector& x, const Vector& xh) const {
  const Vector e = x - P * xh;
  return e.dot(Mhat * e);
}

void StorageCertificate::validate(const Tolerance& tol) const {
  const auto n = Mhat.rows();
  if (Mhat.cols() != n || P.rows() != n) invalid("Mhat must be n x n and P must have n rows");
  if (X11.rows() != X11.cols() || X22.rows() != X22.cols() || X12.rows() != X11.rows() ||
      X12.cols() != X22.rows() || X21.rows() != X22.rows() || X21.cols() != X11.rows()) {
    invalid("X blocks have inconsistent shapes");
  }
  if (Z.rows() != n || Z.cols() != X11.rows()) invalid("Z must be n x r");
  if (W.rows() != Z.cols() || What.rows() != Z.cols()) invalid("W and What must have r rows");
  if (!(kappa_hat > 0.0)) invalid("kappa_hat must be positive");
  if (!(pi > 0.0 && pi < kappa_hat)) invalid("pi must lie in (0, kappa_hat)");
  try {
    if (!is_positive_definite(Mhat, tol)) invalid("Mhat must be positive definite");
    if (max_abs(X21 - X12.transpose()) > tol.residual * (1.0 + max_abs(X12))) invalid("X must be symmetric");
    symmetrized(X11, tol);
    if (!is_negative_semidefinite(X22, tol)) invalid("X22 must be negative semidefinite");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CertificateInvalid) throw;
    invalid(e.what());
  }
}

// ---------------------------------------------------------------------------

double ComparisonFunctions::alpha_inverse(double s) const { return std::sqrt(std::max(s, 0.0) / alpha_coeff); }

double ComparisonFunctions::decay(double s, double t) const { return s * std::exp(-eta_coeff * t); }

void ComparisonFunctions::validate() const {
  if (!(alpha_coeff > 0.0) || !(eta_coeff > 0.0) || !(rho_coeff >= 0.0) || !std::isfinite(alpha_coeff) ||
      !std::isfinite(rho_coeff)) {
    invalid("comparison functions need c_alpha > 0, kappa > 0, c_rho >= 0");
  }
}

// ---------------------------------------------------------------------------

bool VerificationReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return e.passed; });
}

void VerificationReport::add(std::string check, double margin, double tol, std::optional<std::vector<double>> witness) {
  const bool ok = margin <= tol;
  add_decided(std::move(check), margin, tol, ok, std::move(witness));
}

void VerificationReport::add_decided(std::string check, double margin, double tol, bool ok,
                                     std::optional<std::vector<double>> witness) {
  entries.push_back(CheckEntry{std::move(check), margin, tol, ok, std::move(witness)});
}

const CheckEntry* VerificationReport::find(const std::string& check) const {
  for (const auto& e : entries) {
    if (e.check == check) return &e;
  }
  return nullptr;
}

void VerificationReport::merge(const VerificationReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
}

// ---------------------------------------------------------------------------

ComparisonFunctions derive_comparison_functions(const NonlinearControlSystem& sys, const NonlinearControlSystem& abs_sys,
                                                const StorageCertificate& cert, const Tolerance& tol) {
  cert.validate(tol);
  if (cert.Rtilde.rows() != sys.m() || cert.Rtilde.cols() != abs_sys.m()) invalid("Rtilde must be m x mh");
  if (cert.P.cols() != abs_sys.n() || cert.Mhat.rows() != sys.n()) invalid("certificate dimensions do not match systems");

  ComparisonFunctions cf;
  const double lam_min = min_eigenvalue(cert.Mhat, tol);
  const double c1_top = sys.q1() > 0 ? max_eigenvalue(sys.C1.transpose() * sys.C1, tol) : 0.0;
  // With C1 = 0 the output gap vanishes identically and any positive c_alpha is valid.
  cf.alpha_coeff = c1_top > 0.0 ? lam_min / c1_top : lam_min;
  cf.eta_coeff = cert.kappa_hat - cert.pi;

  const Matrix mismatch = sys.B * cert.Rtilde - cert.P * abs_sys.B;
  const double scale = 1.0 + max_abs(sys.B * cert.Rtilde) + max_abs(cert.P * abs_sys.B);
  if (mismatch.size() == 0 || max_abs(mismatch) <= tol.residual * scale) {
    cf.rho_coeff = 0.0;
  } else {
    const Vector sv = singular_values(symmetric_sqrt(cert.Mhat, tol) * mismatch);
    cf.rho_coeff = sv(0) * sv(0) / cert.pi;
  }
  cf.validate();
  return cf;
}

Vector interface_input(const StorageCertificate& cert, const NonlinearControlSystem& sys, const Vector& x,
                       const Vector& xh, const Vector& uh) {
  if (x.size() != sys.n() || cert.P.rows() != sys.n() || cert.P.cols() != xh.size() ||
      cert.Rtilde.cols() != uh.size() || cert.K.rows() != sys.m()) {
    throw Error(ErrorCode::DimensionMismatch, "interface arguments do not match certificate dimensions");
  }
  const Vector Pxh = cert.P * xh;
  Vector u = cert.K * (x - Pxh) + cert.Q * xh + cert.Rtilde * uh;
  if (!sys.phi.is_zero()) {
    const double fx = (sys.F * x)(0);
    const double fpx = (sys.F * Pxh)(0);
    u += cert.L1.col(0) * sys.phi(fx) - cert.L2.col(0) * sys.phi(fpx);
  }
  return u;
}

Matrix compute_Rtilde(const Matrix& Mhat, const Matrix& P, const Matrix& B, const Matrix& Bh) {
  if (Mhat.rows() != B.rows() || P.rows() != B.rows() || P.cols() != Bh.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "compute_Rtilde dimension mismatch");
  }
  if (B.cols() == 0) return Matrix::Zero(0, Bh.cols());
  const Matrix gram = B.transpose() * Mhat * B;
  const Vector sv = singular_values(gram);
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= kGramConditionLimit)) {
    std::ostringstream os;
    os << "B^T Mhat B has condition number " << cond;
    throw Error(ErrorCode::SingularGram, os.str());
  }
  return gram.ldlt().solve(B.transpose() * Mhat * P * Bh);
}

// ---------------------------------------------------------------------------

std::vector<double> DissipationSample::flatten() const {
  std::vector<double> out;
  for (const Vector* v : {&x, &xh, &uh, &w, &wh}) out.insert(out.end(), v->data(), v->data() + v->size());
  return out;
}

DissipationTerms evaluate_dissipation(const NonlinearControlSystem& sys, const NonlinearControlSystem& abs_sys,
                                      const StorageCertificate& cert, const ComparisonFunctions& cf,
                                      const DissipationSample& s) {
  const Vector u = interface_input(cert, sys, s.x, s.xh, s.uh);
  const Vector f = sys.drift(s.x, u, s.w);
  const Vector fh = abs_sys.drift(s.xh, s.uh, s.wh);
  const Vector e = s.x - cert.P * s.xh;
  const Vector Me = cert.Mhat * e;

  DissipationTerms t;
  const double V = e.dot(Me);
  t.lhs = 2.0 * Me.dot(f - cert.P * fh);
  t.decay = cf.eta(V);
  t.rho = cf.rho(s.uh.norm());

  const auto r = cert.X11.rows();
  const auto q = cert.X22.rows();
  if (r + q > 0) {
    Vector supply_vec(r + q);
    if (r > 0) {
      Vector top = Vector::Zero(r);
      if (cert.W.cols() > 0) top += cert.W * s.w;
      if (cert.What.cols() > 0) top -= cert.What * s.wh;
      supply_vec.head(r) = top;
    }
    if (q > 0) {
      Vector bottom = sys.C2 * s.x;
      if (cert.H.cols() > 0) bottom -= cert.H * (abs_sys.C2 * s.xh);
      supply_vec.tail(q) = bottom;
    }
    t.supply = supply_vec.dot(cert.X() * supply_vec);
  }
  t.margin = t.lhs - (-t.decay + t.rho + t.supply);
  t.scale = std::abs(t.lhs) + std::abs(t.decay) + std::abs(t.rho) + std::abs(t.supply);

  const double gap = (sys.C1 * s.x - abs_sys.C1 * s.xh).norm();
  t.output_gap = cf.alpha(gap) - V;
  t.output_scale = cf.alpha(gap) + std::abs(V);
  return t;
}

std::vector<DissipationSample> draw_samples(const NonlinearControlSystem& sys, const NonlinearControlSystem& abs_sys,
                                            const Matrix& P, const SamplingOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  const double R = opts.radius;
  std::vector<DissipationSample> out;
  out.reserve(static_cast<std::size_t>(std::max(opts.samples, 0)));
  for (int k = 0; k < opts.samples; ++k) {
    DissipationSample s;
    s.xh = sample_ball(rng, abs_sys.n(), R);
    const int regime = k % 4;
    if (regime == 0) {
      s.x = sample_ball(rng, sys.n(), R);
      s.uh = sample_ball(rng, abs_sys.m(), R);
      s.w = sample_ball(rng, sys.p(), R);
      s.wh = sample_ball(rng, abs_sys.p(), R);
    } else {
      const double offset = log_uniform(rng, 1e-6, R);
      s.x = P * s.xh + sample_ball(rng, sys.n(), offset);
      const double inner = regime == 1 ? 0.0 : log_uniform(rng, 1e-6, R);
      s.w = sample_ball(rng, sys.p(), inner);
      s.wh = sample_ball(rng, abs_sys.p(), inner);
      s.uh = regime == 3 ? sample_ball(rng, abs_sys.m(), inner) : Vector::Zero(abs_sys.m());
    }
    out.push_back(std::move(s));
  }
  return out;
}

VerificationReport verify_dissipation_inequality(const NonlinearControlSystem& sys,
                                                 const NonlinearControlSystem& abs_sys,
                                                 const StorageCertificate& cert, const SamplingOptions& opts,
                                                 const Tolerance& tol, std::optional<ComparisonFunctions> cf_opt) {
  VerificationReport report;
  const ComparisonFunctions cf = cf_opt ? *cf_opt : derive_comparison_functions(sys, abs_sys, cert, tol);

  double worst_excess = -std::numeric_limits<double>::infinity();
  double worst_margin = 0.0, worst_tol = 0.0;
  std::vector<double> worst_witness;
  double worst_out_excess = -std::numeric_limits<double>::infinity();
  double worst_out = 0.0, worst_out_tol = 0.0;
  std::vector<double> worst_out_witness;

  for (const auto& s : draw_samples(sys, abs_sys, cert.P, opts)) {
    const DissipationTerms t = evaluate_dissipation(sys, abs_sys, cert, cf, s);
    const double used = tol.residual * (1.0 + t.scale);
    if (t.margin - used > worst_excess) {
      worst_excess = t.margin - used;
      worst_margin = t.margin;
      worst_tol = used;
      worst_witness = s.flatten();
    }
    const double out_used = tol.residual * (1.0 + t.output_scale);
    if (t.output_gap - out_used > worst_out_excess) {
      worst_out_excess = t.output_gap - out_used;
      worst_out = t.output_gap;
      worst_out_tol = out_used;
      worst_out_witness = s.flatten();
    }
  }
  if (opts.samples <= 0) return report;
  report.add("dissipation_inequality", worst_margin, worst_tol, worst_witness);
  report.add("output_lower_bound", worst_out, worst_out_tol, worst_out_witness);
  return report;
}

// ---------------------------------------------------------------------------

double error_bound(const ComparisonFunctions& cf, double V0, double uhat_sup, double t, bool use_half) {
  cf.validate();
  const double c = use_half ? 1.0 : 2.0;
  const double transient = cf.alpha_inverse(c * cf.decay(std::max(V0, 0.0), std::max(t, 0.0)));
  const double steady = cf.alpha_inverse(c * cf.eta_inverse(c * cf.rho(uhat_sup)));
  return transient + steady;
}

double safe_set_inflation(const ComparisonFunctions& cf, double V0, double uhat_sup, bool use_half) {
  return error_bound(cf, V0, uhat_sup, 0.0, use_half);
}

}  // namespace netabs
