#include "netabs/matgeo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace netabs {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::AsymmetricBeyondTol: return "AsymmetricBeyondTol";
    case ErrorCode::RowMismatch: return "RowMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::C2NotInvertible: return "C2NotInvertible";
    case ErrorCode::PNotInjective: return "PNotInjective";
    case ErrorCode::NoCommonLeftInverse: return "NoCommonLeftInverse";
    case ErrorCode::NotRestrictedForm: return "NotRestrictedForm";
    case ErrorCode::ConditionsNotCertified: return "ConditionsNotCertified";
    case ErrorCode::CertificateInvalid: return "CertificateInvalid";
    case ErrorCode::UnsupportedNonlinearity: return "UnsupportedNonlinearity";
    case ErrorCode::BadDescriptor: return "BadDescriptor";
    case ErrorCode::BadScenario: return "BadScenario";
    case ErrorCode::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

void Tolerance::validate() const {
  if (!(definiteness >= 0.0) || !(rank >= 0.0) || !(residual >= 0.0)) {
    throw Error(ErrorCode::BadScenario, "tolerances must be nonnegative");
  }
}

bool all_finite(const Matrix& A) { return A.size() == 0 || A.allFinite(); }

double max_abs(const Matrix& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

Matrix symmetrized(const Matrix& S, const Tolerance& tol) {
  if (S.rows() != S.cols()) {
    std::ostringstream os;
    os << "expected a square matrix, got " << S.rows() << "x" << S.cols();
    throw Error(ErrorCode::NonSquare, os.str());
  }
  if (S.size() == 0) return S;
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol.residual * (1.0 + max_abs(S))) {
    std::ostringstream os;
    os << "asymmetry " << asym << " exceeds tolerance";
    throw Error(ErrorCode::AsymmetricBeyondTol, os.str());
  }
  return 0.5 * (S + S.transpose());
}

Vector symmetric_eigenvalues(const Matrix& S, const Tolerance& tol) {
  const Matrix sym = symmetrized(S, tol);
  if (sym.size() == 0) return Vector(0);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double max_eigenvalue(const Matrix& S, const Tolerance& tol) {
  const Vector ev = symmetric_eigenvalues(S, tol);
  return ev.size() == 0 ? 0.0 : ev(ev.size() - 1);
}

double min_eigenvalue(const Matrix& S, const Tolerance& tol) {
  const Vector ev = symmetric_eigenvalues(S, tol);
  return ev.size() == 0 ? 0.0 : ev(0);
}

Definiteness check_negative_semidefinite(const Matrix& S, const Tolerance& tol) {
  const double top = max_eigenvalue(S, tol);
  return {top <= tol.definiteness, top};
}

Definiteness check_positive_definite(const Matrix& S, const Tolerance& tol) {
  if (S.rows() == 0 && S.cols() == 0) return {true, 0.0};
  const double bottom = min_eigenvalue(S, tol);
  return {bottom > tol.definiteness, bottom};
}

bool is_negative_semidefinite(const Matrix& S, const Tolerance& tol) {
  return check_negative_semidefinite(S, tol).holds;
}

bool is_positive_definite(const Matrix& S, const Tolerance& tol) {
  return check_positive_definite(S, tol).holds;
}

Vector singular_values(const Matrix& A) {
  if (A.size() == 0) return Vector(0);
  Eigen::BDCSVD<Matrix> svd(A);
  return svd.singularValues();
}

namespace {

Eigen::Index rank_from_singular_values(const Vector& sv, const Tolerance& tol) {
  if (sv.size() == 0) return 0;
  const double top = sv(0);
  if (!(top > 0.0)) return 0;
  const double cutoff = tol.rank * top;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++r;
  }
  return r;
}

void require_finite(const Matrix& A, const char* what) {
  if (!all_finite(A)) throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has non-finite entries");
}

}  // namespace

Eigen::Index numerical_rank(const Matrix& A, const Tolerance& tol) {
  return rank_from_singular_values(singular_values(A), tol);
}

Matrix horizontal_concat(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) {
    throw Error(ErrorCode::RowMismatch, "horizontal concatenation needs equal row counts");
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

Matrix vertical_concat(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "vertical concatenation needs equal column counts");
  }
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

bool image_subset(const Matrix& A, const Matrix& B, const Tolerance& tol) {
  if (A.rows() != B.rows()) {
    throw Error(ErrorCode::RowMismatch, "image_subset needs A.rows() == B.rows()");
  }
  if (A.cols() == 0) return true;
  return numerical_rank(B, tol) == numerical_rank(horizontal_concat(B, A), tol);
}

Matrix pseudoinverse(const Matrix& A, const Tolerance& tol) {
  require_finite(A, "pseudoinverse input");
  if (A.size() == 0) return Matrix::Zero(A.cols(), A.rows());
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Eigen::Index r = rank_from_singular_values(sv, tol);
  if (r == 0) return Matrix::Zero(A.cols(), A.rows());
  const Matrix U = svd.matrixU().leftCols(r);
  const Matrix V = svd.matrixV().leftCols(r);
  return V * sv.head(r).cwiseInverse().asDiagonal() * U.transpose();
}

FactorSolution solve_factor(const Matrix& Y, const Matrix& X, const Tolerance& tol) {
  if (X.rows() != Y.rows()) {
    throw Error(ErrorCode::RowMismatch, "solve_factor needs X.rows() == Y.rows()");
  }
  FactorSolution out;
  const Matrix G = pseudoinverse(X, tol) * Y;
  out.residual = (X * G - Y).norm();
  out.threshold = tol.residual * (1.0 + Y.norm());
  if (out.residual <= out.threshold) out.G = G;
  return out;
}

Matrix kernel_basis(const Matrix& A, const Tolerance& tol) {
  const Eigen::Index n = A.cols();
  if (A.rows() == 0 || n == 0) return Matrix::Identity(n, n);
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeFullV);
  const Eigen::Index r = rank_from_singular_values(svd.singularValues(), tol);
  if (r == 0) return Matrix::Identity(n, n);
  return svd.matrixV().rightCols(n - r);
}

Matrix image_basis(const Matrix& A, const Tolerance& tol) {
  if (A.size() == 0) return Matrix::Zero(A.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU);
  const Eigen::Index r = rank_from_singular_values(svd.singularValues(), tol);
  return svd.matrixU().leftCols(r);
}

Matrix schur_complement(const Matrix& S, Eigen::Index k, const Tolerance& tol) {
  if (S.rows() != S.cols()) throw Error(ErrorCode::NonSquare, "schur_complement needs a square matrix");
  if (k < 0 || k > S.rows()) throw Error(ErrorCode::DimensionMismatch, "schur block size out of range");
  const Eigen::Index rest = S.rows() - k;
  return S.bottomRightCorner(rest, rest) -
         S.bottomLeftCorner(rest, k) * pseudoinverse(S.topLeftCorner(k, k), tol) * S.topRightCorner(k, rest);
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Matrix ones(Eigen::Index rows, Eigen::Index cols) { return Matrix::Ones(rows, cols); }

Matrix symmetric_sqrt(const Matrix& S, const Tolerance& tol) {
  const Matrix sym = symmetrized(S, tol);
  if (sym.size() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  const Vector root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace netabs
