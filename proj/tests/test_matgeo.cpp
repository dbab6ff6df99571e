#include <gtest/gtest.h>

#include "netabs/matgeo.hpp"
#include "test_support.hpp"

using namespace netabs;
using netabs::testing::Rng;

namespace {

Matrix complete_laplacian3() {
  Matrix L(3, 3);
  L << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  return L;
}

}  // namespace

TEST(Tolerance, DefaultsAndValidation) {
  Tolerance t;
  EXPECT_DOUBLE_EQ(t.definiteness, 1e-9);
  EXPECT_DOUBLE_EQ(t.rank, 1e-10);
  EXPECT_DOUBLE_EQ(t.residual, 1e-9);
  EXPECT_NO_THROW(t.validate());
  t.rank = -1.0;
  EXPECT_THROW(t.validate(), Error);
}

TEST(NegativeSemidefinite, Examples) {
  EXPECT_TRUE(is_negative_semidefinite(-Matrix::Identity(2, 2)));
  Matrix S(2, 2);
  S << 0, 1, 1, 0;
  EXPECT_FALSE(is_negative_semidefinite(S));
  const Matrix L = complete_laplacian3();
  EXPECT_TRUE(is_negative_semidefinite(-(L + L.transpose())));
}

TEST(NegativeSemidefinite, Errors) {
  try {
    is_negative_semidefinite(Matrix::Zero(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSquare);
  }
  Matrix S(2, 2);
  S << 0, 1, 0, 0;
  try {
    is_negative_semidefinite(S);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AsymmetricBeyondTol);
  }
  // Asymmetry below the gate is symmetrized away.
  S << -1, 1e-13, 0, -1;
  EXPECT_TRUE(is_negative_semidefinite(S));
}

TEST(NegativeSemidefinite, MarginIsMaxEigenvalue) {
  Matrix S = Matrix::Zero(3, 3);
  S.diagonal() << -3, -1, 0.25;
  const auto d = check_negative_semidefinite(S);
  EXPECT_FALSE(d.holds);
  EXPECT_NEAR(d.margin, 0.25, 1e-14);
}

TEST(PositiveDefinite, Examples) {
  EXPECT_TRUE(is_positive_definite(Matrix::Identity(3, 3)));
  EXPECT_FALSE(is_positive_definite(Matrix::Zero(2, 2)));
  for (int n : {1, 3, 5}) EXPECT_TRUE(is_positive_definite(Matrix::Identity(n, n)));
  EXPECT_THROW(is_positive_definite(Matrix::Zero(1, 2)), Error);
}

TEST(ImageSubset, Examples) {
  EXPECT_TRUE(image_subset(Matrix::Identity(2, 2), Matrix::Identity(2, 2)));
  Matrix A(2, 1), B(2, 1);
  A << 1, 1;
  B << 1, 0;
  EXPECT_FALSE(image_subset(A, B));
  for (int n : {1, 3, 4}) EXPECT_TRUE(image_subset(Matrix::Identity(n, n), Matrix::Identity(n, n)));
  try {
    image_subset(Matrix::Zero(2, 1), Matrix::Zero(3, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RowMismatch);
  }
}

TEST(SolveFactor, Examples) {
  auto s = solve_factor(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  ASSERT_TRUE(s.feasible());
  EXPECT_LT((*s.G - Matrix::Identity(2, 2)).norm(), 1e-14);

  // Y = A P with A = 0, X = [P | -B] -> G = 0.
  const Matrix P = ones(3, 1);
  const Matrix Y = Matrix::Zero(3, 3) * P;
  const Matrix X = horizontal_concat(P, -Matrix::Identity(3, 3));
  s = solve_factor(Y, X);
  ASSERT_TRUE(s.feasible());
  EXPECT_EQ(s.G->rows(), 4);
  EXPECT_EQ(s.G->cols(), 1);
  EXPECT_LT(s.G->norm(), 1e-15);

  Matrix y(2, 1), x(2, 1);
  y << 1, 1;
  x << 1, 0;
  s = solve_factor(y, x);
  EXPECT_FALSE(s.feasible());
  EXPECT_NEAR(s.residual, 1.0, 1e-12);
  EXPECT_THROW(solve_factor(Matrix::Zero(2, 1), Matrix::Zero(3, 1)), Error);
}

TEST(Pseudoinverse, Examples) {
  EXPECT_LT((pseudoinverse(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-14);
  EXPECT_LT((pseudoinverse(ones(3, 1)) - ones(1, 3) / 3.0).norm(), 1e-14);
  EXPECT_EQ(pseudoinverse(Matrix::Zero(2, 2)), Matrix::Zero(2, 2));
}

TEST(KernelBasis, Examples) {
  Matrix A(1, 2);
  A << 1, 0;
  Matrix K = kernel_basis(A);
  ASSERT_EQ(K.cols(), 1);
  EXPECT_NEAR(std::abs(K(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(K(0, 0), 0.0, 1e-14);

  K = kernel_basis(Matrix::Identity(2, 2));
  EXPECT_EQ(K.rows(), 2);
  EXPECT_EQ(K.cols(), 0);

  K = kernel_basis(Matrix::Zero(1, 2));
  ASSERT_EQ(K.cols(), 2);
  EXPECT_LT((K.transpose() * K - Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(Rank, RelativeCutoffIsScaleInvariant) {
  Rng rng(3);
  const Matrix A = rng.low_rank(6, 5, 3);
  EXPECT_EQ(numerical_rank(A), 3);
  EXPECT_EQ(numerical_rank(1e8 * A), 3);
  EXPECT_EQ(numerical_rank(1e-8 * A), 3);
  EXPECT_EQ(numerical_rank(Matrix::Zero(3, 3)), 0);
}

TEST(SchurComplement, MatchesBlockFormula) {
  Rng rng(4);
  const Matrix S = rng.spd(5);
  const Matrix sc = schur_complement(S, 2);
  const Matrix ref = S.bottomRightCorner(3, 3) -
                     S.bottomLeftCorner(3, 2) * S.topLeftCorner(2, 2).inverse() * S.topRightCorner(2, 3);
  EXPECT_LT((sc - ref).norm(), 1e-12);
}

TEST(Helpers, BlockDiagonalAndConcat) {
  const Matrix D = block_diagonal({ones(2, 1), 2.0 * Matrix::Identity(1, 1)});
  Matrix ref(3, 2);
  ref << 1, 0, 1, 0, 0, 2;
  EXPECT_EQ(D, ref);
  EXPECT_EQ(horizontal_concat(Matrix::Identity(2, 2), ones(2, 1)).cols(), 3);
  EXPECT_EQ(vertical_concat(Matrix::Identity(2, 2), ones(1, 2)).rows(), 3);
  EXPECT_DOUBLE_EQ(max_abs(-3.0 * ones(2, 2)), 3.0);
  const Matrix R = symmetric_sqrt(4.0 * Matrix::Identity(2, 2));
  EXPECT_LT((R - 2.0 * Matrix::Identity(2, 2)).norm(), 1e-14);
}

// ---------------------------------------------------------------------------
// Properties.

TEST(NegativeSemidefiniteProperty, AgreesWithCharacteristicPolynomial) {
  Rng rng(11);
  const Tolerance tol;
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = rng.integer(1, 4);
    Matrix S = rng.symmetric(n);
    // Bias half the draws towards NSD with a near-zero top eigenvalue.
    if (trial % 2) {
      Matrix V = rng.matrix(n, n);
      S = -V * V.transpose();
      if (rng.coin()) S += rng.uniform(-1e-3, 1e-3) * Matrix::Identity(n, n);
    }
    const double lam = netabs::testing::max_eig_charpoly(S);
    if (std::abs(lam - tol.definiteness) < 1e-7) continue;  // undecidable by the oracle's precision
    EXPECT_EQ(is_negative_semidefinite(S, tol), lam <= tol.definiteness) << S;
    ++checked;
  }
  EXPECT_GT(checked, 350);
}

TEST(NegativeSemidefiniteProperty, AgreesWithPrincipalMinors) {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = rng.integer(1, 4);
    Matrix V = rng.matrix(n, rng.integer(1, n));
    Matrix S = -V * V.transpose();
    if (trial % 3 == 0) S += 0.05 * Matrix::Identity(n, n);
    // NSD iff -S is PSD.
    EXPECT_EQ(is_negative_semidefinite(S), netabs::testing::psd_by_principal_minors(-S, 1e-10)) << S;
  }
}

TEST(ImageSubsetProperty, AgreesWithColumnwiseSolve) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.integer(2, 6);
    const Matrix B = rng.low_rank(n, rng.integer(1, 5), rng.integer(1, n));
    Matrix A = rng.coin() ? Matrix(B * rng.matrix(B.cols(), rng.integer(1, 3))) : rng.matrix(n, rng.integer(1, 3));
    bool every_column = true;
    for (Eigen::Index j = 0; j < A.cols(); ++j) every_column = every_column && solve_factor(A.col(j), B).feasible();
    EXPECT_EQ(image_subset(A, B), every_column);
    EXPECT_EQ(solve_factor(A, B).feasible(), image_subset(A, B));
  }
}

TEST(PseudoinverseProperty, PenroseIdentities) {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const int r = rng.integer(1, 8), c = rng.integer(1, 8);
    const Matrix A = rng.coin() ? rng.matrix(r, c) : rng.low_rank(r, c, rng.integer(1, std::min(r, c)));
    const Matrix Ap = pseudoinverse(A);
    const double s = 1.0 + A.norm();
    EXPECT_LT((A * Ap * A - A).norm(), 1e-9 * s);
    EXPECT_LT((Ap * A * Ap - Ap).norm(), 1e-9 * (1 + Ap.norm()));
    EXPECT_LT((A * Ap - (A * Ap).transpose()).norm(), 1e-9);
    EXPECT_LT((Ap * A - (Ap * A).transpose()).norm(), 1e-9);
  }
}

TEST(KernelBasisProperty, OrthonormalAndComplementary) {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const int r = rng.integer(1, 6), c = rng.integer(1, 6);
    const Matrix A = rng.low_rank(r, c, rng.integer(1, std::min(r, c)));
    const Matrix K = kernel_basis(A);
    EXPECT_EQ(K.cols() + numerical_rank(A), c);
    if (K.cols() > 0) {
      EXPECT_LT((A * K).norm(), 1e-9 * (1 + A.norm()));
      EXPECT_LT((K.transpose() * K - Matrix::Identity(K.cols(), K.cols())).norm(), 1e-10);
    }
  }
}
