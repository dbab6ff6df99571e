#pragma once

// Dense real-matrix geometry with explicit tolerances.
//
// Exact relations (semidefinite orderings, equalities, image inclusions) are
// decided numerically against the three tolerances held in `Tolerance`.
// Rank decisions use a cutoff relative to the largest singular value.

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "netabs/error.hpp"

namespace netabs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Tolerance {
  double definiteness = 1e-9;  // eigenvalue slack
  double rank = 1e-10;         // singular-value cutoff, relative to sigma_max
  double residual = 1e-9;      // relative least-squares residual

  void validate() const;
};

/// Result of an eigenvalue-based definiteness test. `margin` is the extreme
/// eigenvalue that decided it (max eigenvalue for NSD, min for PD).
struct Definiteness {
  bool holds = false;
  double margin = 0.0;
};

/// Result of `solve_factor`: `G` is engaged only when the residual is within
/// tolerance.
struct FactorSolution {
  std::optional<Matrix> G;
  double residual = 0.0;   // ||X G - Y||_F of the least-norm candidate
  double threshold = 0.0;  // residual_tol * (1 + ||Y||_F)

  bool feasible() const { return G.has_value(); }
};

bool all_finite(const Matrix& A);

/// Gate on asymmetry and return (S + S^T) / 2.
Matrix symmetrized(const Matrix& S, const Tolerance& tol = {});

/// Eigenvalues of the symmetric part, ascending. Empty for 0x0.
Vector symmetric_eigenvalues(const Matrix& S, const Tolerance& tol = {});
double max_eigenvalue(const Matrix& S, const Tolerance& tol = {});
double min_eigenvalue(const Matrix& S, const Tolerance& tol = {});

Definiteness check_negative_semidefinite(const Matrix& S, const Tolerance& tol = {});
Definiteness check_positive_definite(const Matrix& S, const Tolerance& tol = {});
bool is_negative_semidefinite(const Matrix& S, const Tolerance& tol = {});
bool is_positive_definite(const Matrix& S, const Tolerance& tol = {});

Vector singular_values(const Matrix& A);
Eigen::Index numerical_rank(const Matrix& A, const Tolerance& tol = {});

/// im A ⊆ im B, decided as rank(B) == rank([B | A]).
bool image_subset(const Matrix& A, const Matrix& B, const Tolerance& tol = {});

/// Least-norm G with X G = Y; infeasible when the residual exceeds
/// residual_tol * (1 + ||Y||_F).
FactorSolution solve_factor(const Matrix& Y, const Matrix& X, const Tolerance& tol = {});

Matrix pseudoinverse(const Matrix& A, const Tolerance& tol = {});

/// Orthonormal basis of ker A (A.cols() x k); k = 0 when the kernel is trivial.
Matrix kernel_basis(const Matrix& A, const Tolerance& tol = {});

/// Orthonormal basis of im A (A.rows() x rank).
Matrix image_basis(const Matrix& A, const Tolerance& tol = {});

/// Schur complement of the leading k x k block: S22 - S21 S11^+ S12.
Matrix schur_complement(const Matrix& S, Eigen::Index k, const Tolerance& tol = {});

Matrix block_diagonal(const std::vector<Matrix>& blocks);
Matrix horizontal_concat(const Matrix& left, const Matrix& right);
Matrix vertical_concat(const Matrix& top, const Matrix& bottom);
Matrix ones(Eigen::Index rows, Eigen::Index cols = 1);

/// sqrt of a symmetric positive semidefinite matrix via eigen-decomposition.
Matrix symmetric_sqrt(const Matrix& S, const Tolerance& tol = {});

double max_abs(const Matrix& A);

}  // namespace netabs
