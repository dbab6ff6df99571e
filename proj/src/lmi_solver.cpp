#include "netabs/lmi_solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

#include "netabs/synthesis.hpp"

namespace netabs {

namespace {

const double kSqrt2 = std::sqrt(2.0);

Eigen::Index svec_size(Eigen::Index n) { return n * (n + 1) / 2; }

// Symmetric-matrix coordinates with sqrt(2)-weighted off-diagonals, so the
// Euclidean norm of svec(S) is the Frobenius norm of S.
void svec_into(const Matrix& S, Vector& v, Eigen::Index at) {
  const auto n = S.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    v(at++) = S(j, j);
    for (Eigen::Index i = j + 1; i < n; ++i) v(at++) = kSqrt2 * 0.5 * (S(i, j) + S(j, i));
  }
}

Matrix smat(const Vector& v, Eigen::Index at, Eigen::Index n) {
  Matrix S(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    S(j, j) = v(at++);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      S(i, j) = S(j, i) = v(at++) / kSqrt2;
    }
  }
  return S;
}

void mat_into(const Matrix& M, Vector& v, Eigen::Index at) {
  v.segment(at, M.size()) = Eigen::Map<const Vector>(M.data(), M.size());
}

Matrix mat(const Vector& v, Eigen::Index at, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data() + at, rows, cols);
}

/// Eigenvalues clipped from below at `floor` (or from above at `ceil` for negated use).
Matrix clip_below(const Matrix& S, double floor) {
  if (S.size() == 0) return S;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  const Vector lam = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

struct Layout {
  Eigen::Index n = 0, m = 0, r = 0;
  bool row = false;
  Eigen::Index mbar = 0, kbar = 0, l1 = 0, x22 = 0, x21 = 0, x11 = 0, size = 0;

  Layout(Eigen::Index n_, Eigen::Index m_, Eigen::Index r_, bool row_) : n(n_), m(m_), r(r_), row(row_) {
    mbar = 0;
    kbar = mbar + svec_size(n);
    l1 = kbar + m * n;
    x22 = l1 + (row ? m : 0);
    x21 = x22 + svec_size(n);
    x11 = x21 + n * r;
    size = x11 + svec_size(r);
  }

  BarVariables unpack(const Vector& v, const Matrix& Z) const {
    BarVariables b;
    b.Mbar = smat(v, mbar, n);
    b.Kbar = mat(v, kbar, m, n);
    b.L1 = row ? mat(v, l1, m, 1) : Matrix::Zero(m, 1);
    b.Z = Z;
    b.Xbar22 = smat(v, x22, n);
    b.Xbar21 = mat(v, x21, n, r);
    b.Xbar12 = b.Xbar21.transpose();
    b.X11 = smat(v, x11, r);
    return b;
  }

  Vector pack(const BarVariables& b) const {
    Vector v(size);
    svec_into(b.Mbar, v, mbar);
    mat_into(b.Kbar, v, kbar);
    if (row) mat_into(b.L1, v, l1);
    svec_into(b.Xbar22, v, x22);
    mat_into(b.Xbar21, v, x21);
    svec_into(b.X11, v, x11);
    return v;
  }
};

}  // namespace

LmiSolveResult solve_restricted_lmi(const NonlinearControlSystem& sys, const LmiSolverOptions& options,
                                    const Tolerance& tol) {
  sys.validate();
  if (sys.C2.rows() != sys.n() || numerical_rank(sys.C2, tol) < sys.n()) {
    throw Error(ErrorCode::C2NotInvertible, "the bar-variable form needs a square invertible C2");
  }
  if (!(options.kappa_hat > 0.0) || options.max_iters <= 0) {
    throw Error(ErrorCode::BadScenario, "solver needs kappa_hat > 0 and max_iters > 0");
  }
  const bool row = sys.has_nonlinearity();
  const Layout lay(sys.n(), sys.m(), sys.p(), row);
  const Matrix Z = sys.D;
  const double kh = options.kappa_hat;

  // Slack S = -bar_lmi(v) = A v + c, tabulated column by column.
  auto slack = [&](const Vector& v) { return Matrix(-bar_lmi_matrix(sys, lay.unpack(v, Z), kh, row)); };
  const Matrix S0 = slack(Vector::Zero(lay.size));
  const auto N = S0.rows();
  const auto ns = svec_size(N);
  Vector c(ns);
  svec_into(S0, c, 0);
  Matrix Amap(ns, lay.size);
  for (Eigen::Index j = 0; j < lay.size; ++j) {
    Vector e = Vector::Zero(lay.size);
    e(j) = 1.0;
    Vector col(ns);
    svec_into(slack(e), col, 0);
    Amap.col(j) = col - c;
  }
  const Eigen::LLT<Matrix> normal(Matrix::Identity(lay.size, lay.size) + Amap.transpose() * Amap);

  // Shift J: the strict margin applies to every diagonal block except a
  // zero nonlinearity corner (b = +inf), which can only be met with equality.
  Vector shift = Vector::Constant(N, options.slack);
  if (row && sys.phi.upper_is_infinite()) shift(N - 1) = 0.0;
  const Matrix J = shift.asDiagonal();

  auto project_cones = [&](Vector& v, Matrix& S) {
    const Matrix Mb = clip_below(smat(v, lay.mbar, lay.n), options.mbar_floor);
    svec_into(Mb, v, lay.mbar);
    const Matrix X22 = -clip_below(-smat(v, lay.x22, lay.n), 0.0);
    svec_into(X22, v, lay.x22);
    S = J + clip_below(S - J, 0.0);
  };

  BarVariables start;
  start.Mbar = Matrix::Identity(lay.n, lay.n);
  start.Kbar = Matrix::Zero(lay.m, lay.n);
  start.L1 = Matrix::Zero(lay.m, 1);
  start.Z = Z;
  start.Xbar22 = Matrix::Zero(lay.n, lay.n);
  start.Xbar21 = Z;
  start.X11 = Matrix::Identity(lay.r, lay.r);
  Vector v = lay.pack(start);
  Matrix S = slack(v);
  project_cones(v, S);

  StorageCertificate base;
  base.kappa_hat = kh;
  base.pi = kh / 2.0;
  base.W = Matrix::Identity(lay.r, lay.r);

  LmiSolveResult result;
  for (int it = 1; it <= options.max_iters; ++it) {
    // Affine projection: min |v - v0|^2 + |s - s0|^2 subject to s = A v + c.
    Vector s0(ns);
    svec_into(S, s0, 0);
    v = normal.solve(v + Amap.transpose() * (s0 - c));
    S = smat(Amap * v + c, 0, N);

    // Candidate: the affine point with its variable cones enforced.
    Vector vc = v;
    Matrix Sc = S;
    project_cones(vc, Sc);
    const BarVariables cand = lay.unpack(vc, Z);
    result.iterations = it;
    result.final_margin = max_eigenvalue(bar_lmi_matrix(sys, cand, kh, row), tol);
    if (result.final_margin <= 0.0) {
      try {
        StorageCertificate cert = from_bar_lmi(sys, cand, base, tol);
        if (check_assumption1(sys, cert, tol).passed()) {
          result.status = LmiSolveStatus::Feasible;
          result.certificate = std::move(cert);
          return result;
        }
      } catch (const Error&) {
        // Mbar not invertible at this iterate; keep projecting.
      }
    }
    v = vc;
    S = Sc;
  }
  return result;
}

std::optional<LmiSolveResult> maximize_kappa_hat(const NonlinearControlSystem& sys, double lo, double hi,
                                                 int bisection_steps, LmiSolverOptions options, const Tolerance& tol) {
  options.kappa_hat = lo;
  LmiSolveResult best = solve_restricted_lmi(sys, options, tol);
  if (best.status != LmiSolveStatus::Feasible) return std::nullopt;
  for (int k = 0; k < bisection_steps; ++k) {
    const double mid = 0.5 * (lo + hi);
    options.kappa_hat = mid;
    LmiSolveResult trial = solve_restricted_lmi(sys, options, tol);
    if (trial.status == LmiSolveStatus::Feasible) {
      lo = mid;
      best = std::move(trial);
    } else {
      hi = mid;
    }
  }
  return best;
}

}  // namespace netabs
