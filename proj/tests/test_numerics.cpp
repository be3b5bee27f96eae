#include <gtest/gtest.h>

#include <random>

#include "affinelp/model.hpp"
#include "affinelp/numerics.hpp"
#include "oracles.hpp"

using namespace affinelp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

SymMatrix sym2(double a, double b, double c) {
  Matrix m(2, 2);
  m << a, b, b, c;
  return SymMatrix::from_upper(m);
}

}  // namespace

TEST(SymMatrix, MaterializationIsBitwiseSymmetric) {
  Rng rng(3);
  const Matrix m = gaussian_matrix(5, 5, rng);
  const SymMatrix s = SymMatrix::from_upper(m);
  EXPECT_TRUE((s.matrix().array() == s.matrix().transpose().array()).all());
  EXPECT_DOUBLE_EQ(s(1, 3), m(1, 3));
  EXPECT_DOUBLE_EQ(s(3, 1), m(1, 3));
}

TEST(SymMatrix, FromSymmetricRejectsAsymmetricInput) {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_THROW(SymMatrix::from_symmetric(m), DimensionError);
}

TEST(SymMatrix, RejectsNonFiniteEntries) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(SymMatrix::from_upper(m), DimensionError);
}

TEST(Hv, UpperTriangleRowMajor) {
  EXPECT_EQ(hv(sym2(1, 2, 3)), vec({1, 2, 3}));
  EXPECT_EQ(hv(SymMatrix::identity(2)), vec({1, 0, 1}));
  EXPECT_EQ(hv(SymMatrix::outer(vec({1, 2}))), vec({1, 2, 4}));
}

TEST(Hv, ThreeByThreeOrdering) {
  Matrix m(3, 3);
  m << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  EXPECT_EQ(hv(SymMatrix::from_upper(m)), vec({1, 2, 3, 4, 5, 6}));
}

TEST(HvWeighted, DoublesOffDiagonal) {
  const Vector z = vec({1, 2});
  const Vector w = hv_weighted(SymMatrix::outer(z));
  EXPECT_EQ(w, vec({1, 4, 4}));
  EXPECT_DOUBLE_EQ(w.dot(hv(sym2(1, 2, 3))), 21.0);
  EXPECT_EQ(hv_weighted(SymMatrix::identity(2)), vec({1, 0, 1}));
}

TEST(HvWeighted, QuadraticFormIdentityOnRandomInstances) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index k = 1 + trial % 6;
    const Vector z = gaussian_vector(k, rng);
    const SymMatrix Q = SymMatrix::from_upper(gaussian_matrix(k, k, rng));
    const double direct = z.dot(Q.matrix() * z);
    EXPECT_NEAR(hv_weighted(SymMatrix::outer(z)).dot(hv(Q)), direct,
                1e-12 * (1.0 + std::abs(direct)));
  }
}

TEST(Hv, RoundTripAndSizeInversion) {
  Rng rng(5);
  for (Eigen::Index k = 1; k <= 6; ++k) {
    const SymMatrix Q = SymMatrix::from_upper(gaussian_matrix(k, k, rng));
    EXPECT_EQ(from_hv(hv(Q), k).matrix(), Q.matrix());
    EXPECT_EQ(dim_from_hv_size(hv_size(k)), k);
  }
  EXPECT_THROW(dim_from_hv_size(4), DimensionError);
}

TEST(Hankel, ScalarDepthTwo) {
  Matrix s(1, 5);
  s << 1, 2, 3, 4, 5;
  Matrix expected(2, 4);
  expected << 1, 2, 3, 4, 2, 3, 4, 5;
  EXPECT_EQ(hankel(s, 2), expected);
  EXPECT_EQ(hankel(s, 1), s);
}

TEST(Hankel, VectorSequenceShape) {
  Rng rng(2);
  const Matrix s = gaussian_matrix(2, 5, rng);
  const Matrix h = hankel(s, 2);
  EXPECT_EQ(h.rows(), 4);
  EXPECT_EQ(h.cols(), 4);
  EXPECT_EQ(h.block(2, 0, 2, 1), s.col(1));
}

TEST(Hankel, BlockStructure) {
  Rng rng(8);
  const Eigen::Index m = 2;
  const Eigen::Index K = 4;
  const Matrix h = hankel(gaussian_matrix(m, 12, rng), K);
  for (Eigen::Index i = 1; i < K; ++i) {
    for (Eigen::Index j = 0; j + 1 < h.cols(); ++j) {
      EXPECT_EQ(h.block(i * m, j, m, 1), h.block((i - 1) * m, j + 1, m, 1));
    }
  }
}

TEST(Hankel, DepthLargerThanLengthThrows) {
  EXPECT_THROW(hankel(Matrix::Ones(1, 3), 4), DepthError);
  EXPECT_THROW(hankel(Matrix::Ones(1, 3), 0), DepthError);
}

TEST(NumericalRank, Examples) {
  EXPECT_EQ(numerical_rank(Matrix::Identity(3, 3)), 3u);
  EXPECT_EQ(numerical_rank(Matrix::Zero(3, 4)), 0u);
  Matrix m(2, 3);
  m << 1, 2, 3, 2, 4, 6;
  EXPECT_EQ(numerical_rank(m), 1u);
}

TEST(NumericalRank, InvariantUnderPermutationAndRotation) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix low = gaussian_matrix(6, 3, rng) * gaussian_matrix(3, 8, rng);
    const std::size_t r = numerical_rank(low);
    EXPECT_EQ(r, 3u);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 6, rng);
    EXPECT_EQ(numerical_rank(perm * low), r);
    const Matrix Qm = gaussian_matrix(8, 8, rng).householderQr().householderQ();
    EXPECT_EQ(numerical_rank(low * Qm), r);
  }
}

TEST(SolveLinear, Examples) {
  EXPECT_EQ(solve_linear(Matrix::Identity(2, 2), vec({3, 4}), SolveMode::exact),
            vec({3, 4}));
  Matrix a(1, 2);
  a << 1, 1;
  const Vector x = solve_linear(a, vec({2}), SolveMode::least_norm);
  EXPECT_NEAR(x(0), 1.0, 1e-14);
  EXPECT_NEAR(x(1), 1.0, 1e-14);
}

TEST(SolveLinear, RandomFullRowRankResidual) {
  Rng rng(4);
  const Matrix a = gaussian_matrix(4, 7, rng);
  const Vector b = gaussian_vector(4, rng);
  const Vector x = solve_linear(a, b, SolveMode::least_norm);
  EXPECT_LE((a * x - b).norm(), 1e-10);
}

TEST(SolveLinear, LeastNormBeatsOtherSolutions) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = gaussian_matrix(3, 6, rng);
    const Vector b = gaussian_vector(3, rng);
    const Vector x = solve_linear(a, b, SolveMode::least_norm);
    const Matrix N = null_space(a);
    ASSERT_EQ(N.cols(), 3);
    EXPECT_LE((N.transpose() * x).norm(), 1e-10);
    const Vector other = x + N * gaussian_vector(3, rng);
    EXPECT_LE((a * other - b).norm(), 1e-10);
    EXPECT_LE(x.norm(), other.norm() + 1e-12);
  }
}

TEST(SolveLinear, SingularAndInconsistentSystemsThrow) {
  Matrix singular(2, 2);
  singular << 1, 2, 2, 4;
  EXPECT_THROW(solve_linear(singular, vec({1, 0}), SolveMode::exact),
               SolveError);
  EXPECT_THROW(solve_linear(singular, vec({1, 0}), SolveMode::least_norm),
               SolveError);
  try {
    solve_linear(singular, vec({1, 0}), SolveMode::least_norm);
  } catch (const SolveError& e) {
    EXPECT_GT(e.residual(), 0.1);
  }
}

TEST(Definiteness, MinEigenvalueAndPD) {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  EXPECT_NEAR(min_eigenvalue(m), 1.0, 1e-14);
  EXPECT_TRUE(is_positive_definite(m));
  m(0, 0) = 0.5;
  EXPECT_FALSE(is_positive_definite(m));
}

TEST(Vstack, StacksAndChecksWidth) {
  const Matrix s = vstack({Matrix::Ones(1, 3), Matrix::Zero(2, 3)});
  EXPECT_EQ(s.rows(), 3);
  EXPECT_EQ(s.row(0).sum(), 3.0);
  EXPECT_THROW(vstack({Matrix::Ones(1, 3), Matrix::Ones(1, 2)}),
               DimensionError);
}
