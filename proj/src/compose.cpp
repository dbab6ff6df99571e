#include "netabs/compose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace netabs {

namespace {

template <class Get>
Matrix stack_blocks(const InterconnectionSpec& spec, Get get) {
  std::vector<Matrix> blocks;
  for (const auto& c : spec.components) blocks.push_back(get(c));
  return block_diagonal(blocks);
}

std::vector<Vector> split(const Vector& v, const std::vector<Eigen::Index>& sizes) {
  std::vector<Vector> out;
  Eigen::Index at = 0;
  for (auto s : sizes) {
    out.push_back(v.segment(at, s));
    at += s;
  }
  return out;
}

Vector join(const std::vector<Vector>& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  Vector out(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

Vector sample_ball(std::mt19937_64& rng, Eigen::Index dim, double radius) {
  if (dim == 0) return Vector(0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = gauss(rng);
  const double nrm = v.norm();
  if (nrm == 0.0) return Vector::Zero(dim);
  return v * (radius * std::pow(unif(rng), 1.0 / static_cast<double>(dim)) / nrm);
}

void require_mu(const Vector& mu, std::size_t n) {
  if (static_cast<std::size_t>(mu.size()) != n) throw Error(ErrorCode::DimensionMismatch, "mu must have one entry per subsystem");
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (!(mu(i) >= 0.0) || !std::isfinite(mu(i))) throw Error(ErrorCode::DimensionMismatch, "mu must be nonnegative");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

void InterconnectionSpec::validate() const {
  if (components.empty()) throw Error(ErrorCode::DimensionMismatch, "interconnection needs at least one subsystem");
  Eigen::Index p = 0, q = 0;
  for (const auto& c : components) {
    c.system.validate();
    c.abstraction.validate();
    const auto& k = c.certificate;
    p += c.system.p();
    q += c.system.q2();
    if (k.W.cols() != c.system.p() || k.What.cols() != c.abstraction.p() || k.H.rows() != c.system.q2() ||
        k.H.cols() != c.abstraction.q2() || k.X22.rows() != c.system.q2() || k.W.rows() != k.X11.rows() ||
        k.What.rows() != k.X11.rows() || k.P.rows() != c.system.n() || k.P.cols() != c.abstraction.n()) {
      throw Error(ErrorCode::DimensionMismatch, "component certificate does not match its systems");
    }
  }
  if (M.rows() != p || M.cols() != q) throw Error(ErrorCode::DimensionMismatch, "M must be (sum p_i) x (sum q2_i)");
}

Matrix InterconnectionSpec::stacked_W() const {
  return stack_blocks(*this, [](const Component& c) { return c.certificate.W; });
}
Matrix InterconnectionSpec::stacked_What() const {
  return stack_blocks(*this, [](const Component& c) { return c.certificate.What; });
}
Matrix InterconnectionSpec::stacked_H() const {
  return stack_blocks(*this, [](const Component& c) { return c.certificate.H; });
}

Matrix assemble_X(const std::vector<StorageCertificate>& certs, const Vector& mu) {
  require_mu(mu, certs.size());
  std::vector<Matrix> b11, b12, b21, b22;
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const auto& c = certs[i];
    if (c.X12.rows() != c.X11.rows() || c.X12.cols() != c.X22.rows() || c.X21.rows() != c.X22.rows() ||
        c.X21.cols() != c.X11.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "supply blocks are inconsistent");
    }
    const double m = mu(static_cast<Eigen::Index>(i));
    b11.push_back(m * c.X11);
    b12.push_back(m * c.X12);
    b21.push_back(m * c.X21);
    b22.push_back(m * c.X22);
  }
  const Matrix X11 = block_diagonal(b11), X12 = block_diagonal(b12), X21 = block_diagonal(b21),
               X22 = block_diagonal(b22);
  const auto r = X11.rows(), q = X22.rows();
  Matrix out(r + q, r + q);
  out.topLeftCorner(r, r) = X11;
  out.topRightCorner(r, q) = X12;
  out.bottomLeftCorner(q, r) = X21;
  out.bottomRightCorner(q, q) = X22;
  return out;
}

ConditionResult check_condition5(const InterconnectionSpec& spec, const Vector& mu, const Tolerance& tol) {
  std::vector<StorageCertificate> certs;
  for (const auto& c : spec.components) certs.push_back(c.certificate);
  const Matrix X = assemble_X(certs, mu);
  const Matrix WM = spec.stacked_W() * spec.M;
  const Matrix T = vertical_concat(WM, Matrix::Identity(spec.M.cols(), spec.M.cols()));
  const Matrix S = T.transpose() * X * T;
  const auto d = check_negative_semidefinite(0.5 * (S + S.transpose()), tol);
  return {d.holds, d.margin};
}

ConditionResult check_condition6(const InterconnectionSpec& spec, const Matrix& Mhat, const Tolerance& tol) {
  const Matrix lhs = spec.stacked_W() * spec.M * spec.stacked_H();
  const Matrix What = spec.stacked_What();
  if (What.cols() != Mhat.rows() || Mhat.cols() != lhs.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "Mhat must be (sum ph_i) x (sum qh2_i)");
  }
  const Matrix diff = lhs - What * Mhat;
  const double res = diff.size() > 0 ? max_abs(diff) : 0.0;
  return {res <= tol.residual, res};
}

std::optional<Matrix> solve_abstract_coupling(const InterconnectionSpec& spec, const Tolerance& tol) {
  const Matrix lhs = spec.stacked_W() * spec.M * spec.stacked_H();
  const Matrix What = spec.stacked_What();
  if (What.cols() == 0) {
    if (lhs.size() == 0 || max_abs(lhs) <= tol.residual) return Matrix::Zero(0, lhs.cols());
    return std::nullopt;
  }
  const FactorSolution sol = solve_factor(lhs, What, tol);
  if (!sol.feasible()) return std::nullopt;
  return *sol.G;
}

// ---------------------------------------------------------------------------

ComparisonFunctions compose_comparison_functions(const std::vector<ComparisonFunctions>& parts, const Vector& mu,
                                                 const std::vector<bool>& has_output) {
  require_mu(mu, parts.size());
  if (has_output.size() != parts.size()) throw Error(ErrorCode::DimensionMismatch, "has_output size mismatch");
  double inv_alpha = 0.0;
  double kappa = std::numeric_limits<double>::infinity();
  double rho = 0.0;
  bool any_output = false;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double m = mu(static_cast<Eigen::Index>(i));
    const auto& p = parts[i];
    if (has_output[i]) {
      if (m <= 0.0) {
        throw Error(ErrorCode::ConditionsNotCertified, "a subsystem with nonzero output needs mu_i > 0");
      }
      inv_alpha += 1.0 / (m * p.alpha_coeff);
      any_output = true;
    }
    if (m > 0.0) kappa = std::min(kappa, p.eta_coeff);
    rho = std::max(rho, m * p.rho_coeff);
  }
  if (!std::isfinite(kappa)) throw Error(ErrorCode::ConditionsNotCertified, "all weights are zero");
  ComparisonFunctions cf;
  cf.alpha_coeff = any_output ? 1.0 / inv_alpha : 1.0;
  cf.eta_coeff = kappa;
  cf.rho_coeff = rho;
  cf.validate();
  return cf;
}

CompositeSimulationFunction::CompositeSimulationFunction(std::vector<Matrix> P, std::vector<Matrix> Mhat, Vector mu,
                                                         ComparisonFunctions cf)
    : P_(std::move(P)), Mhat_(std::move(Mhat)), mu_(std::move(mu)), cf_(cf) {
  if (P_.size() != Mhat_.size() || static_cast<std::size_t>(mu_.size()) != P_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "composite storage parts disagree in count");
  }
}

double CompositeSimulationFunction::operator()(const Vector& x, const Vector& xh) const {
  double v = 0.0;
  Eigen::Index ax = 0, ah = 0;
  for (std::size_t i = 0; i < P_.size(); ++i) {
    const auto n = P_[i].rows(), nh = P_[i].cols();
    if (ax + n > x.size() || ah + nh > xh.size()) throw Error(ErrorCode::DimensionMismatch, "stacked state too short");
    const Vector e = x.segment(ax, n) - P_[i] * xh.segment(ah, nh);
    v += mu_(static_cast<Eigen::Index>(i)) * e.dot(Mhat_[i] * e);
    ax += n;
    ah += nh;
  }
  if (ax != x.size() || ah != xh.size()) throw Error(ErrorCode::DimensionMismatch, "stacked state too long");
  return v;
}

CompositionCertificate certify_composition(const InterconnectionSpec& spec, const Vector& mu,
                                           const std::optional<Matrix>& Mhat, const Tolerance& tol) {
  spec.validate();
  CompositionCertificate cc;
  cc.mu = mu;
  std::vector<StorageCertificate> certs;
  std::vector<ComparisonFunctions> parts;
  std::vector<bool> has_output;
  for (const auto& c : spec.components) {
    certs.push_back(c.certificate);
    parts.push_back(derive_comparison_functions(c.system, c.abstraction, c.certificate, tol));
    has_output.push_back(c.system.q1() > 0 && max_abs(c.system.C1) > 0.0);
  }
  cc.X_assembled = assemble_X(certs, mu);
  cc.W = spec.stacked_W();
  cc.What = spec.stacked_What();
  cc.H = spec.stacked_H();
  if (Mhat) {
    cc.Mhat_coupling = *Mhat;
  } else {
    auto solved = solve_abstract_coupling(spec, tol);
    // Unsolvable: keep the least-squares candidate so the residual is reported.
    cc.Mhat_coupling = solved ? *solved
                              : Matrix(pseudoinverse(cc.What, tol) * (cc.W * spec.M * cc.H));
  }
  cc.condition5_margin = check_condition5(spec, mu, tol).value;
  cc.condition6_residual = check_condition6(spec, cc.Mhat_coupling, tol).value;
  cc.definiteness_tol = tol.definiteness;
  cc.residual_tol = tol.residual;
  cc.composite_cf = compose_comparison_functions(parts, mu, has_output);
  return cc;
}

CompositeSimulationFunction compose_simulation_function(const InterconnectionSpec& spec, const Vector& mu,
                                                        const Matrix& Mhat, const Tolerance& tol) {
  const CompositionCertificate cc = certify_composition(spec, mu, Mhat, tol);
  if (!cc.passed()) {
    throw Error(ErrorCode::ConditionsNotCertified, "conditions 5 and 6 must hold to compose storage functions");
  }
  std::vector<Matrix> P, M;
  for (const auto& c : spec.components) {
    P.push_back(c.certificate.P);
    M.push_back(c.certificate.Mhat);
  }
  return CompositeSimulationFunction(std::move(P), std::move(M), mu, cc.composite_cf);
}

// ---------------------------------------------------------------------------

VerificationReport verify_composite(const InterconnectionSpec& spec, const Vector& mu, const Matrix& Mhat, int samples,
                                    std::uint64_t seed, const Tolerance& tol, double radius) {
  spec.validate();
  VerificationReport report;
  std::vector<StorageCertificate> certs;
  std::vector<ComparisonFunctions> parts;
  std::vector<bool> has_output;
  std::vector<Eigen::Index> n, nh, m, mh, p, ph, q, qh;
  for (const auto& c : spec.components) {
    certs.push_back(c.certificate);
    parts.push_back(derive_comparison_functions(c.system, c.abstraction, c.certificate, tol));
    has_output.push_back(c.system.q1() > 0 && max_abs(c.system.C1) > 0.0);
    n.push_back(c.system.n());
    nh.push_back(c.abstraction.n());
    m.push_back(c.system.m());
    mh.push_back(c.abstraction.m());
    p.push_back(c.system.p());
    ph.push_back(c.abstraction.p());
    q.push_back(c.system.q2());
    qh.push_back(c.abstraction.q2());
  }
  const ComparisonFunctions cf = compose_comparison_functions(parts, mu, has_output);
  const Eigen::Index Nh = std::accumulate(nh.begin(), nh.end(), Eigen::Index{0});
  const Eigen::Index Mh = std::accumulate(mh.begin(), mh.end(), Eigen::Index{0});
  std::vector<Matrix> Pblocks;
  for (const auto& c : certs) Pblocks.push_back(c.P);
  const Matrix P = block_diagonal(Pblocks);
  if (Mhat.rows() != std::accumulate(ph.begin(), ph.end(), Eigen::Index{0}) ||
      Mhat.cols() != std::accumulate(qh.begin(), qh.end(), Eigen::Index{0})) {
    throw Error(ErrorCode::DimensionMismatch, "Mhat must be (sum ph_i) x (sum qh2_i)");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) {
    return std::pow(10.0, std::log10(lo) + unif(rng) * (std::log10(hi) - std::log10(lo)));
  };

  double worst_excess = -std::numeric_limits<double>::infinity(), worst_margin = 0.0, worst_tol = 0.0;
  double worst_out_excess = -std::numeric_limits<double>::infinity(), worst_out = 0.0, worst_out_tol = 0.0;
  std::vector<double> witness, out_witness;

  for (int k = 0; k < samples; ++k) {
    const Vector xh = sample_ball(rng, Nh, radius);
    const int regime = k % 3;
    Vector x, uh;
    if (regime == 0) {
      x = sample_ball(rng, P.rows(), radius);
      uh = sample_ball(rng, Mh, radius);
    } else {
      x = P * xh + sample_ball(rng, P.rows(), log_uniform(1e-6, radius));
      uh = regime == 1 ? Vector::Zero(Mh) : sample_ball(rng, Mh, log_uniform(1e-6, radius));
    }
    const auto xs = split(x, n), xhs = split(xh, nh), uhs = split(uh, mh);
    std::vector<Vector> ys, yhs;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ys.push_back(spec.components[i].system.C2 * xs[i]);
      yhs.push_back(spec.components[i].abstraction.C2 * xhs[i]);
    }
    const auto ws = split(spec.M * join(ys), p);
    const auto whs = split(Mhat * join(yhs), ph);

    double dV = 0.0, V = 0.0, scale = 0.0;
    std::vector<Vector> z, zh;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto& c = spec.components[i];
      const double mi = mu(static_cast<Eigen::Index>(i));
      const Vector u = interface_input(c.certificate, c.system, xs[i], xhs[i], uhs[i]);
      const Vector f = c.system.drift(xs[i], u, ws[i]);
      const Vector fh = c.abstraction.drift(xhs[i], uhs[i], whs[i]);
      const Vector e = xs[i] - c.certificate.P * xhs[i];
      const Vector Me = c.certificate.Mhat * e;
      const double term = 2.0 * mi * Me.dot(f - c.certificate.P * fh);
      dV += term;
      V += mi * e.dot(Me);
      scale += std::abs(term);
      z.push_back(c.system.C1 * xs[i]);
      zh.push_back(c.abstraction.C1 * xhs[i]);
    }
    const double decay = cf.eta(V);
    const double rho = cf.rho(uh.norm());
    const double margin = dV - (-decay + rho);
    const double used = tol.residual * (1.0 + scale + decay + rho);
    if (margin - used > worst_excess) {
      worst_excess = margin - used;
      worst_margin = margin;
      worst_tol = used;
      witness.assign(x.data(), x.data() + x.size());
      witness.insert(witness.end(), xh.data(), xh.data() + xh.size());
      witness.insert(witness.end(), uh.data(), uh.data() + uh.size());
    }
    const double a = cf.alpha((join(z) - join(zh)).norm());
    const double out_used = tol.residual * (1.0 + a + V);
    if (a - V - out_used > worst_out_excess) {
      worst_out_excess = a - V - out_used;
      worst_out = a - V;
      worst_out_tol = out_used;
      out_witness.assign(x.data(), x.data() + x.size());
      out_witness.insert(out_witness.end(), xh.data(), xh.data() + xh.size());
    }
  }
  if (samples <= 0) return report;
  report.add("composite_dissipation", worst_margin, worst_tol, witness);
  report.add("composite_output_bound", worst_out, worst_out_tol, out_witness);
  return report;
}

Vector search_mu(const InterconnectionSpec& spec, int sweeps, const Tolerance& tol) {
  const auto N = static_cast<Eigen::Index>(spec.size());
  Vector mu = Vector::Ones(N);
  double best = check_condition5(spec, mu, tol).value;
  for (int s = 0; s < sweeps; ++s) {
    for (Eigen::Index i = 1; i < N; ++i) {
      for (int e = -12; e <= 12; ++e) {
        Vector trial = mu;
        trial(i) = mu(i) * std::pow(10.0, e / 4.0 / (s + 1));
        const double v = check_condition5(spec, trial, tol).value;
        if (v < best) {
          best = v;
          mu = trial;
        }
      }
    }
  }
  return mu;
}

}  // namespace netabs
