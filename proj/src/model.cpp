#include "affinelp/model.hpp"

#include <cmath>
#include <sstream>

namespace affinelp {

namespace {

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                   const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << m.rows()
       << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

void require_size(const Vector& v, Eigen::Index size, const char* what) {
  if (v.size() != size) {
    std::ostringstream os;
    os << what << ": expected length " << size << ", got " << v.size();
    throw DimensionError(os.str());
  }
}

}  // namespace

void AffineSystem::validate(double psd_tol) const {
  const Eigen::Index nx = n();
  require_shape(A, nx, nx, "A");
  if (B.rows() != nx) throw DimensionError("B: row count differs from A");
  require_size(c, nx, "c");
  require_size(mu, nx, "mu");
  require_shape(Sigma.matrix(), nx, nx, "Sigma");
  require_finite(A, "A");
  require_finite(B, "B");
  require_finite(c, "c");
  require_finite(mu, "mu");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw PreconditionError("gamma must lie in (0, 1)");
  }
  if (nx > 0 && min_eigenvalue(Sigma.matrix()) < -psd_tol) {
    throw PreconditionError("Sigma is not positive semidefinite");
  }
}

Vector AffineSystem::mean_successor(const Vector& x, const Vector& u) const {
  return A * x + B * u + c + mu;
}

SymMatrix StageCost::L() const {
  const Eigen::Index nx = n();
  const Eigen::Index nu = m();
  Matrix full(nx + nu, nx + nu);
  full.topLeftCorner(nx, nx) = Lxx;
  full.topRightCorner(nx, nu) = Lxu;
  full.bottomLeftCorner(nu, nx) = Lxu.transpose();
  full.bottomRightCorner(nu, nu) = Luu;
  return SymMatrix::from_upper(full);
}

Vector StageCost::L_linear() const {
  Vector out(Lx.size() + Lu.size());
  out << Lx, Lu;
  return out;
}

void StageCost::validate(double psd_tol) const {
  const Eigen::Index nx = n();
  const Eigen::Index nu = m();
  require_shape(Lxx, nx, nx, "Lxx");
  require_shape(Lxu, nx, nu, "Lxu");
  require_shape(Luu, nu, nu, "Luu");
  require_size(Lx, nx, "Lx");
  require_size(Lu, nu, "Lu");
  require_finite(Lxx, "Lxx");
  require_finite(Lxu, "Lxu");
  require_finite(Luu, "Luu");
  if (!std::isfinite(Lc)) throw DimensionError("Lc: non-finite");
  const double sym_scale = std::max(1.0, Lxx.cwiseAbs().maxCoeff());
  if ((Lxx - Lxx.transpose()).cwiseAbs().maxCoeff() > 1e-10 * sym_scale ||
      (Luu - Luu.transpose()).cwiseAbs().maxCoeff() > 1e-10 * sym_scale) {
    throw PreconditionError("stage cost blocks are not symmetric");
  }
  if (min_eigenvalue(L().matrix()) < -psd_tol) {
    throw PreconditionError("stage cost matrix L is not positive semidefinite");
  }
  if (!is_positive_definite(Luu, psd_tol)) {
    throw PreconditionError("Luu is not positive definite");
  }
}

StageCost StageCost::quadratic(Eigen::Index n, Eigen::Index m, double q,
                               double r) {
  StageCost cost;
  cost.Lxx = q * Matrix::Identity(n, n);
  cost.Lxu = Matrix::Zero(n, m);
  cost.Luu = r * Matrix::Identity(m, m);
  cost.Lx = Vector::Zero(n);
  cost.Lu = Vector::Zero(m);
  cost.Lc = 0.0;
  return cost;
}

double stage_cost_eval(const StageCost& cost, const Vector& x,
                       const Vector& u) {
  if (x.size() != cost.n() || u.size() != cost.m()) {
    throw DimensionError("stage_cost_eval: dimension mismatch");
  }
  return x.dot(cost.Lxx * x) + 2.0 * x.dot(cost.Lxu * u) + u.dot(cost.Luu * u) +
         2.0 * (x.dot(cost.Lx) + u.dot(cost.Lu)) + cost.Lc;
}

AugmentedSystem augment(const AffineSystem& sys, const StageCost& cost) {
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  if (cost.n() != n || cost.m() != m) {
    throw DimensionError("augment: system and cost dimensions differ");
  }
  AugmentedSystem aug;
  aug.Atil = Matrix::Zero(n + 1, n + 1);
  aug.Atil.topLeftCorner(n, n) = sys.A;
  aug.Atil.topRightCorner(n, 1) = sys.c + sys.mu;
  aug.Atil(n, n) = 1.0;

  aug.Btil = Matrix::Zero(n + 1, m);
  aug.Btil.topRows(n) = sys.B;

  Matrix sig = Matrix::Zero(n + 1, n + 1);
  sig.topLeftCorner(n, n) = sys.Sigma.matrix();
  aug.SigmaTil = SymMatrix::from_upper(sig);

  Matrix lxx(n + 1, n + 1);
  lxx.topLeftCorner(n, n) = cost.Lxx;
  lxx.topRightCorner(n, 1) = cost.Lx;
  lxx.bottomLeftCorner(1, n) = cost.Lx.transpose();
  lxx(n, n) = cost.Lc;
  aug.Ltil_xx = SymMatrix::from_upper(lxx);

  aug.Ltil_xu = Matrix(n + 1, m);
  aug.Ltil_xu.topRows(n) = cost.Lxu;
  aug.Ltil_xu.bottomRows(1) = cost.Lu.transpose();
  aug.Luu = cost.Luu;
  aug.gamma = sys.gamma;
  return aug;
}

double augmented_cost_eval(const AugmentedSystem& aug, const Vector& xtil,
                           const Vector& u) {
  return xtil.dot(aug.Ltil_xx.matrix() * xtil) +
         2.0 * xtil.dot(aug.Ltil_xu * u) + u.dot(aug.Luu * u);
}

NoiseSampler::NoiseSampler(const AffineSystem& sys)
    : NoiseSampler(sys.mu, sys.Sigma) {}

NoiseSampler::NoiseSampler(const Vector& mu, const SymMatrix& sigma)
    : mu_(mu) {
  const Eigen::Index n = sigma.dim();
  if (n == 0) {
    factor_ = Matrix(0, 0);
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma.matrix());
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = es.eigenvectors() * root.asDiagonal();
}

Vector NoiseSampler::draw(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(factor_.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return mu_ + factor_ * z;
}

Matrix NoiseSampler::draw_many(Rng& rng, Eigen::Index count) const {
  Matrix out(mu_.size(), count);
  for (Eigen::Index j = 0; j < count; ++j) out.col(j) = draw(rng);
  return out;
}

StepResult step(const AffineSystem& sys, const Vector& x, const Vector& u,
                Rng& rng) {
  const NoiseSampler sampler(sys);
  StepResult r;
  r.xi = sampler.draw(rng);
  r.xplus = sys.A * x + sys.B * u + sys.c + r.xi;
  return r;
}

void Dataset::validate() const {
  const Eigen::Index d = length();
  if (U.cols() != d || Xplus.cols() != d) {
    throw DimensionError("dataset: X, U and Xplus widths differ");
  }
  if (Xplus.rows() != X.rows()) {
    throw DimensionError("dataset: X and Xplus row counts differ");
  }
  if (Omega && (Omega->rows() != X.rows() || Omega->cols() != d)) {
    throw DimensionError("dataset: Omega shape differs from X");
  }
  if (Y && Y->cols() != d) {
    throw DimensionError("dataset: Y width differs");
  }
  require_finite(X, "X");
  require_finite(U, "U");
  require_finite(Xplus, "Xplus");
  if (single_trajectory && d > 1) {
    const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
    const double gap =
        (X.rightCols(d - 1) - Xplus.leftCols(d - 1)).cwiseAbs().maxCoeff();
    if (gap > 1e-12 * scale) {
      throw DimensionError("dataset: flagged single trajectory but columns do "
                           "not chain");
    }
  }
}

bool Dataset::is_deterministic() const {
  return !Omega || Omega->size() == 0 || Omega->cwiseAbs().maxCoeff() == 0.0;
}

double Dataset::replay_error(const AffineSystem& sys) const {
  // Same expression order as simulate(), so deterministic replays are exact.
  double worst = 0.0;
  for (Eigen::Index t = 0; t < length(); ++t) {
    const Vector x = X.col(t);
    const Vector u = U.col(t);
    const Vector xi =
        Omega ? Vector(Omega->col(t)) : Vector(Vector::Zero(n()));
    const Vector pred = sys.A * x + sys.B * u + sys.c + xi;
    worst = std::max(worst, (Xplus.col(t) - pred).cwiseAbs().maxCoeff());
  }
  return worst;
}

Dataset simulate(const AffineSystem& sys, const Vector& x0,
                 const Matrix& inputs, Rng& rng) {
  if (x0.size() != sys.n() || inputs.rows() != sys.m()) {
    throw DimensionError("simulate: dimension mismatch");
  }
  const Eigen::Index d = inputs.cols();
  const NoiseSampler sampler(sys);
  Dataset ds;
  ds.X.resize(sys.n(), d);
  ds.U = inputs;
  ds.Xplus.resize(sys.n(), d);
  Matrix omega(sys.n(), d);
  Vector x = x0;
  for (Eigen::Index t = 0; t < d; ++t) {
    const Vector xi = sampler.draw(rng);
    ds.X.col(t) = x;
    x = sys.A * x + sys.B * inputs.col(t) + sys.c + xi;
    ds.Xplus.col(t) = x;
    omega.col(t) = xi;
  }
  ds.Omega = omega;
  ds.single_trajectory = true;
  return ds;
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                       double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  // Column-major fill keeps draws ordered by time index for sequences.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Vector gaussian_vector(Eigen::Index size, Rng& rng, double scale) {
  return gaussian_matrix(size, 1, rng, scale).col(0);
}

}  // namespace affinelp
