#include "affinelp/numerics.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace affinelp {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw DimensionError(std::string(what) + ": non-finite entry");
  }
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw DimensionError(std::string(what) + ": non-finite entry");
  }
}

SymMatrix::SymMatrix(Eigen::Index dim) : m_(Matrix::Zero(dim, dim)) {}

SymMatrix SymMatrix::from_upper(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("SymMatrix: matrix is not square");
  }
  require_finite(m, "SymMatrix");
  SymMatrix s;
  s.m_ = m.triangularView<Eigen::Upper>();
  s.m_.triangularView<Eigen::StrictlyLower>() = s.m_.transpose();
  return s;
}

SymMatrix SymMatrix::from_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) {
    throw DimensionError("SymMatrix: matrix is not square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw DimensionError("SymMatrix: matrix is not symmetric");
  }
  return from_upper(0.5 * (m + m.transpose()));
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
  return from_upper(Matrix::Identity(dim, dim));
}

SymMatrix SymMatrix::outer(const Vector& z) {
  return from_upper(z * z.transpose());
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  return from_upper(m_ + o.m_);
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  return from_upper(m_ - o.m_);
}

SymMatrix SymMatrix::operator*(double s) const { return from_upper(m_ * s); }

Vector hv(const SymMatrix& m) {
  const Eigen::Index k = m.dim();
  Vector out(hv_size(k));
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      out(idx++) = m(i, j);
    }
  }
  return out;
}

Vector hv_weighted(const SymMatrix& m) {
  const Eigen::Index k = m.dim();
  Vector out(hv_size(k));
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      out(idx++) = (i == j) ? m(i, j) : 2.0 * m(i, j);
    }
  }
  return out;
}

Eigen::Index dim_from_hv_size(Eigen::Index len) {
  Eigen::Index k = 0;
  while (hv_size(k) < len) ++k;
  if (hv_size(k) != len) {
    throw DimensionError("length " + std::to_string(len) +
                         " is not a triangular number");
  }
  return k;
}

SymMatrix from_hv(const Vector& v, Eigen::Index dim) {
  if (v.size() != hv_size(dim)) {
    throw DimensionError("from_hv: length does not match dimension");
  }
  Matrix m = Matrix::Zero(dim, dim);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i; j < dim; ++j) {
      m(i, j) = v(idx++);
    }
  }
  return SymMatrix::from_upper(m);
}

Matrix hankel(const Matrix& seq, Eigen::Index depth) {
  const Eigen::Index m = seq.rows();
  const Eigen::Index d = seq.cols();
  if (depth < 1 || d < depth) {
    std::ostringstream os;
    os << "hankel: depth " << depth << " invalid for sequence of length " << d;
    throw DepthError(os.str());
  }
  const Eigen::Index cols = d - depth + 1;
  Matrix h(m * depth, cols);
  for (Eigen::Index i = 0; i < depth; ++i) {
    h.middleRows(i * m, m) = seq.middleCols(i, cols);
  }
  return h;
}

Vector singular_values(const Matrix& m) {
  if (m.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(m);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("SVD did not converge");
  }
  return svd.singularValues();
}

std::size_t numerical_rank(const Matrix& m, double rel_tol) {
  if (rel_tol <= 0.0) {
    throw PreconditionError("numerical_rank: rel_tol must be positive");
  }
  const Vector s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = rel_tol * s(0);
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) ++r;
  }
  return r;
}

namespace {

double residual_scale(const Matrix& a, const Vector& x, const Vector& b) {
  return std::max({1.0, b.norm(), a.norm() * x.norm()});
}

}  // namespace

Vector solve_linear(const Matrix& a, const Vector& b, SolveMode mode,
                    double rel_tol) {
  if (a.rows() != b.size()) {
    throw DimensionError("solve_linear: row count does not match rhs");
  }
  require_finite(a, "solve_linear");
  require_finite(b, "solve_linear");
  if (mode == SolveMode::exact) {
    if (a.rows() != a.cols()) {
      throw DimensionError("solve_linear: exact mode needs a square matrix");
    }
    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(rel_tol);
    if (!lu.isInvertible()) {
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
      const Vector x = cod.solve(b);
      throw SolveError("solve_linear: singular system", (a * x - b).norm());
    }
    Vector x = lu.solve(b);
    const double res = (a * x - b).norm();
    if (res > 1e3 * rel_tol * residual_scale(a, x, b)) {
      throw SolveError("solve_linear: ill-conditioned system", res);
    }
    return x;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(rel_tol);
  cod.compute(a);
  Vector x = cod.solve(b);
  const double res = (a * x - b).norm();
  if (res > 1e3 * rel_tol * residual_scale(a, x, b)) {
    throw SolveError("solve_linear: inconsistent system", res);
  }
  return x;
}

Matrix null_space(const Matrix& m, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("SVD did not converge");
  }
  const Vector& s = svd.singularValues();
  Eigen::Index r = 0;
  if (s.size() > 0 && s(0) > 0.0) {
    while (r < s.size() && s(r) > rel_tol * s(0)) ++r;
  }
  return svd.matrixV().rightCols(m.cols() - r);
}

double min_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool is_positive_definite(const Matrix& sym, double tol) {
  return min_eigenvalue(sym) > tol;
}

Matrix vstack(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const auto& b : blocks) {
    if (cols >= 0 && b.cols() != cols) {
      throw DimensionError("vstack: column counts differ");
    }
    cols = b.cols();
    rows += b.rows();
  }
  Matrix out(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

}  // namespace affinelp
