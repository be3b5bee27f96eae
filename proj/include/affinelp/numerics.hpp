#pragma once

// Dense linear-algebra primitives shared by every module.
//
// Conventions pinned here are used project-wide:
//  * hv() walks the upper triangle row by row, diagonal entry first in each
//    row: (0,0) (0,1) ... (0,k-1) (1,1) (1,2) ... (k-1,k-1).
//  * hv_weighted() uses the same order with off-diagonal entries doubled, so
//    hv_weighted(M) . hv(Q) = Tr(M Q) for symmetric M, Q. The doubling lives
//    on the data side; decision variables map 1:1 onto entries of Q.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "affinelp/errors.hpp"

namespace affinelp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultRankTol = 1e-8;

// Throws DimensionError when any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);
void require_finite(const Vector& v, const char* what);

// A symmetric matrix. Construction copies the upper triangle into the lower
// one so the stored matrix is bitwise symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Eigen::Index dim);

  // Uses the upper triangle of `m`; the lower triangle is ignored.
  static SymMatrix from_upper(const Matrix& m);
  // Checks |m - m^T| <= tol * max(1, |m|) and then symmetrizes.
  static SymMatrix from_symmetric(const Matrix& m, double tol = 1e-10);
  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix outer(const Vector& z);

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;

 private:
  Matrix m_;
};

inline Eigen::Index hv_size(Eigen::Index dim) { return dim * (dim + 1) / 2; }

Vector hv(const SymMatrix& m);
Vector hv_weighted(const SymMatrix& m);
// Inverse of hv().
SymMatrix from_hv(const Vector& v, Eigen::Index dim);
// Recovers dim from dim(dim+1)/2; throws DimensionError if not triangular.
Eigen::Index dim_from_hv_size(Eigen::Index len);

// Depth-K Hankel matrix of the column sequence S (m x d): block (i, j) is
// S_{i+j}. Result is mK x (d - K + 1).
Matrix hankel(const Matrix& seq, Eigen::Index depth);

// Number of singular values strictly greater than rel_tol * sigma_max.
std::size_t numerical_rank(const Matrix& m, double rel_tol = kDefaultRankTol);
Vector singular_values(const Matrix& m);

enum class SolveMode { exact, least_norm };

// exact: square nonsingular systems. least_norm: minimum 2-norm solution of a
// consistent system (rank deficiency tolerated). Throws SolveError carrying
// the residual norm when the system is singular or inconsistent.
Vector solve_linear(const Matrix& a, const Vector& b, SolveMode mode,
                    double rel_tol = 1e-9);

// Orthonormal basis for the null space of `m` (columns), using the same
// relative rank tolerance as numerical_rank.
Matrix null_space(const Matrix& m, double rel_tol = kDefaultRankTol);

// Smallest eigenvalue of the symmetric part.
double min_eigenvalue(const Matrix& sym);
bool is_positive_definite(const Matrix& sym, double tol = 0.0);

// Stacks matrices with equal column count vertically.
Matrix vstack(const std::vector<Matrix>& blocks);

}  // namespace affinelp
