#include "affinelp/fixedpoint.hpp"

#include <cmath>
#include <complex>
#include <sstream>

namespace affinelp {

double QuadFunction::eval(const Vector& z) const {
  return z.dot(Q.matrix() * z) + 2.0 * z.dot(Ql) + Qc;
}

double QuadFunction::operator()(const Vector& x, const Vector& u) const {
  Vector z(x.size() + u.size());
  z << x, u;
  return eval(z);
}

Vector QuadFunction::theta() const {
  const Vector h = hv(Q);
  Vector out(h.size() + Ql.size() + 1);
  out << h, Ql, Qc;
  return out;
}

QuadFunction QuadFunction::from_theta(const Vector& theta, Eigen::Index nx,
                                      Eigen::Index nu) {
  const Eigen::Index k = nx + nu;
  if (theta.size() != quad_param_count(nx, nu)) {
    throw DimensionError("QuadFunction::from_theta: wrong parameter count");
  }
  QuadFunction q;
  q.nx = nx;
  q.Q = from_hv(theta.head(hv_size(k)), k);
  q.Ql = theta.segment(hv_size(k), k);
  q.Qc = theta(theta.size() - 1);
  return q;
}

double ValueQuad::operator()(const Vector& x) const {
  return x.dot(P.matrix() * x) + 2.0 * x.dot(Pl) + Pc + noise_offset;
}

Vector ValueQuad::theta() const {
  const Vector h = hv(P);
  Vector out(h.size() + Pl.size() + 1);
  out << h, Pl, Pc + noise_offset;
  return out;
}

ValueQuad ValueQuad::from_theta(const Vector& theta, Eigen::Index nx) {
  if (theta.size() != hv_size(nx) + nx + 1) {
    throw DimensionError("ValueQuad::from_theta: wrong parameter count");
  }
  ValueQuad v;
  v.P = from_hv(theta.head(hv_size(nx)), nx);
  v.Pl = theta.segment(hv_size(nx), nx);
  v.Pc = theta(theta.size() - 1);
  return v;
}

namespace {

struct RiccatiBlocks {
  Matrix q;    // Ltil_xx + g At' P At
  Matrix ql;   // Ltil_xu + g At' P Bt
  Matrix qc;   // Luu + g Bt' P Bt
};

RiccatiBlocks riccati_blocks(const AugmentedSystem& aug, const Matrix& P) {
  const double g = aug.gamma;
  RiccatiBlocks b;
  const Matrix PA = P * aug.Atil;
  const Matrix PB = P * aug.Btil;
  b.q = aug.Ltil_xx.matrix() + g * aug.Atil.transpose() * PA;
  b.ql = aug.Ltil_xu + g * aug.Atil.transpose() * PB;
  b.qc = aug.Luu + g * aug.Btil.transpose() * PB;
  return b;
}

Matrix schur_complement(const RiccatiBlocks& b) {
  Eigen::LLT<Matrix> llt(0.5 * (b.qc + b.qc.transpose()));
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("Riccati map: control Hessian is not positive "
                            "definite");
  }
  return b.q - b.ql * llt.solve(b.ql.transpose());
}

Matrix solve_pd(const Matrix& h, const Matrix& rhs, const char* what) {
  Eigen::LLT<Matrix> llt(0.5 * (h + h.transpose()));
  if (llt.info() != Eigen::Success) {
    throw ConditioningError(std::string(what) +
                            ": Hessian is not positive definite");
  }
  return llt.solve(rhs);
}

}  // namespace

SymMatrix riccati_map(const AugmentedSystem& aug, const SymMatrix& Ptil) {
  return SymMatrix::from_upper(
      schur_complement(riccati_blocks(aug, Ptil.matrix())));
}

double are_residual(const AugmentedSystem& aug, const SymMatrix& Ptil) {
  return (Ptil.matrix() - riccati_map(aug, Ptil).matrix()).norm();
}

AreSolution solve_augmented_are(const AugmentedSystem& aug,
                                const AreOptions& opts,
                                const std::optional<SymMatrix>& initial) {
  SymMatrix P = initial ? *initial : aug.Ltil_xx;
  if (P.dim() != aug.Atil.rows()) {
    throw DimensionError("solve_augmented_are: initial guess has wrong size");
  }
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    SymMatrix next = riccati_map(aug, P);
    if (!next.matrix().allFinite()) {
      throw AreError("Riccati iteration diverged");
    }
    const double step = (next.matrix() - P.matrix()).norm();
    P = std::move(next);
    // The second test stops once the update is pure roundoff.
    if (step <= opts.tol || step <= 8.0 * eps * P.matrix().norm()) {
      AreSolution sol;
      const RiccatiBlocks b = riccati_blocks(aug, P.matrix());
      sol.Ptil = P;
      sol.qtil = SymMatrix::from_upper(b.q);
      sol.qtil_l = b.ql;
      sol.qtil_c = 0.5 * (b.qc + b.qc.transpose());
      sol.iterations = it;
      sol.residual = (P.matrix() - schur_complement(b)).norm();
      return sol;
    }
  }
  std::ostringstream os;
  os << "Riccati iteration did not converge in " << opts.max_iter
     << " iterations";
  throw AreError(os.str());
}

namespace {

bool pbh_rank_ok(const Matrix& A, const Matrix& B, std::complex<double> lambda,
                 double rel_tol) {
  const Eigen::Index n = A.rows();
  Eigen::MatrixXcd pencil(n, n + B.cols());
  pencil.leftCols(n) = lambda * Eigen::MatrixXcd::Identity(n, n) -
                       A.cast<std::complex<double>>();
  pencil.rightCols(B.cols()) = B.cast<std::complex<double>>();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return n == 0;
  // Scale the threshold by the pencil's natural magnitude, not by sigma_max
  // alone, so a tiny B does not hide an uncontrollable mode.
  const double scale = std::max({1.0, A.norm(), B.norm()});
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * scale) ++r;
  }
  return r == n;
}

}  // namespace

bool is_stabilizable(const AffineSystem& sys, double rel_tol) {
  const double sg = std::sqrt(sys.gamma);
  const Matrix A = sg * sys.A;
  const Matrix B = sg * sys.B;
  if (A.rows() == 0) return true;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(
      A.cast<std::complex<double>>(), false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto lambda = es.eigenvalues()(i);
    if (std::abs(lambda) >= 1.0 - 1e-12 && !pbh_rank_ok(A, B, lambda, rel_tol)) {
      return false;
    }
  }
  return true;
}

bool is_controllable(const Matrix& A, const Matrix& B, double rel_tol) {
  if (A.rows() == 0) return true;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(
      A.cast<std::complex<double>>(), false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (!pbh_rank_ok(A, B, es.eigenvalues()(i), rel_tol)) return false;
  }
  return true;
}

double relaxed_offset(const QuadFunction& q_star, const AffineSystem& sys) {
  const Matrix ql = q_star.Qxu();
  const Matrix inner = ql * solve_pd(q_star.Quu(), ql.transpose(),
                                     "relaxed_offset");
  return sys.gamma * (inner * sys.Sigma.matrix()).trace() / (1.0 - sys.gamma);
}

FixedPoints compute_fixed_points(const AffineSystem& sys,
                                 const StageCost& cost,
                                 const AreOptions& opts) {
  sys.validate();
  cost.validate();
  if (cost.n() != sys.n() || cost.m() != sys.m()) {
    throw DimensionError("system and cost dimensions differ");
  }
  if (!is_stabilizable(sys)) {
    throw PreconditionError("(sqrt(gamma) A, sqrt(gamma) B) is not "
                            "stabilizable");
  }
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const double g = sys.gamma;
  const AugmentedSystem aug = augment(sys, cost);

  FixedPoints fp;
  fp.are = solve_augmented_are(aug, opts);
  const Matrix& Pt = fp.are.Ptil.matrix();

  fp.v_star.P = SymMatrix::from_upper(Pt.topLeftCorner(n, n));
  fp.v_star.Pl = Pt.topRightCorner(n, 1);
  fp.v_star.Pc = Pt(n, n);
  fp.v_star.noise_offset =
      g * (fp.v_star.P.matrix() * sys.Sigma.matrix()).trace() / (1.0 - g);

  // Augmented Q blocks are ordered (x, y, u); fold y = 1 into the linear
  // and constant terms.
  const Matrix& qt = fp.are.qtil.matrix();
  Matrix Q(n + m, n + m);
  Q.topLeftCorner(n, n) = qt.topLeftCorner(n, n);
  Q.topRightCorner(n, m) = fp.are.qtil_l.topRows(n);
  Q.bottomLeftCorner(m, n) = fp.are.qtil_l.topRows(n).transpose();
  Q.bottomRightCorner(m, m) = fp.are.qtil_c;
  fp.q_star.nx = n;
  fp.q_star.Q = SymMatrix::from_upper(Q);
  fp.q_star.Ql = Vector(n + m);
  fp.q_star.Ql << qt.topRightCorner(n, 1), fp.are.qtil_l.row(n).transpose();
  fp.q_star.Qc = qt(n, n) + fp.v_star.noise_offset;

  fp.relaxed_offset = relaxed_offset(fp.q_star, sys);
  fp.q_hat = fp.q_star;
  fp.q_hat.Qc += fp.relaxed_offset;

  fp.policy = policy_from_value(fp.v_star, sys, cost);
  return fp;
}

ValueQuad optimal_value(const AffineSystem& sys, const StageCost& cost,
                        const AreOptions& opts) {
  return compute_fixed_points(sys, cost, opts).v_star;
}

QuadFunction optimal_q(const AffineSystem& sys, const StageCost& cost,
                       const AreOptions& opts) {
  return compute_fixed_points(sys, cost, opts).q_star;
}

QuadFunction relaxed_q(const AffineSystem& sys, const StageCost& cost,
                       const AreOptions& opts) {
  return compute_fixed_points(sys, cost, opts).q_hat;
}

QuadFunction biased_q(const FixedPoints& fp, const AffineSystem& sys,
                      double alpha_norm_sq) {
  if (!(alpha_norm_sq > 0.0)) {
    throw PreconditionError("biased_q: alpha_norm_sq must be positive");
  }
  QuadFunction q = fp.q_hat;
  const double g = sys.gamma;
  q.Qc += g * (alpha_norm_sq - 1.0) *
          (fp.q_star.Qxx() * sys.Sigma.matrix()).trace() / (1.0 - g);
  return q;
}

QuadFunction biased_q(const AffineSystem& sys, const StageCost& cost,
                      double alpha_norm_sq, const AreOptions& opts) {
  if (!(alpha_norm_sq > 0.0)) {
    throw PreconditionError("biased_q: alpha_norm_sq must be positive");
  }
  return biased_q(compute_fixed_points(sys, cost, opts), sys, alpha_norm_sq);
}

AffinePolicy optimal_policy(const AffineSystem& sys, const StageCost& cost,
                            const AreOptions& opts) {
  return compute_fixed_points(sys, cost, opts).policy;
}

AffinePolicy policy_from_value(const ValueQuad& v, const AffineSystem& sys,
                               const StageCost& cost) {
  const double g = sys.gamma;
  const Matrix& P = v.P.matrix();
  const Matrix ql = cost.Lxu + g * sys.A.transpose() * P * sys.B;
  const Matrix qc = cost.Luu + g * sys.B.transpose() * P * sys.B;
  const Vector q = cost.Lu + g * sys.B.transpose() * (v.Pl + P * (sys.c + sys.mu));
  AffinePolicy pi;
  pi.K = -solve_pd(qc, ql.transpose(), "optimal_policy");
  pi.k = -solve_pd(qc, q, "optimal_policy");
  return pi;
}

double apply_T_linear(const ValueQuad& v, const AffineSystem& sys,
                      const StageCost& cost, const Vector& x,
                      const Vector& u) {
  const Vector mbar = sys.mean_successor(x, u);
  const Matrix& P = v.P.matrix();
  const double expected = mbar.dot(P * mbar) +
                          (P * sys.Sigma.matrix()).trace() +
                          2.0 * mbar.dot(v.Pl) + v.Pc + v.noise_offset;
  return stage_cost_eval(cost, x, u) + sys.gamma * expected;
}

AffinePolicy greedy_policy(const ValueQuad& v, const AffineSystem& sys,
                           const StageCost& cost) {
  const double g = sys.gamma;
  const Matrix& P = v.P.matrix();
  const Matrix H = cost.Luu + g * sys.B.transpose() * P * sys.B;
  const Matrix lin_x = cost.Lxu.transpose() + g * sys.B.transpose() * P * sys.A;
  const Vector lin_c =
      cost.Lu + g * sys.B.transpose() * (P * (sys.c + sys.mu) + v.Pl);
  AffinePolicy pi;
  pi.K = -solve_pd(H, lin_x, "greedy_policy");
  pi.k = -solve_pd(H, lin_c, "greedy_policy");
  return pi;
}

double apply_T(const ValueQuad& v, const AffineSystem& sys,
               const StageCost& cost, const Vector& x) {
  const AffinePolicy pi = greedy_policy(v, sys, cost);
  return apply_T_linear(v, sys, cost, x, pi(x));
}

AffinePolicy argmin_policy(const QuadFunction& q) {
  AffinePolicy pi;
  const Matrix quu = q.Quu();
  pi.K = -solve_pd(quu, q.Qxu().transpose(), "argmin_policy");
  pi.k = -solve_pd(quu, q.qu(), "argmin_policy");
  return pi;
}

ValueQuad minimize_over_u(const QuadFunction& q) {
  const Matrix quu = q.Quu();
  const Matrix qxu = q.Qxu();
  const Vector qu = q.qu();
  const Matrix gain = solve_pd(quu, qxu.transpose(), "minimize_over_u");
  const Vector offs = solve_pd(quu, qu, "minimize_over_u");
  ValueQuad v;
  v.P = SymMatrix::from_upper(q.Qxx() - qxu * gain);
  v.Pl = q.qx() - qxu * offs;
  v.Pc = q.Qc - qu.dot(offs);
  return v;
}

double apply_F(const QuadFunction& q, const AffineSystem& sys,
               const StageCost& cost, const Vector& x, const Vector& u) {
  const ValueQuad vq = minimize_over_u(q);
  const Vector mbar = sys.mean_successor(x, u);
  const double expected =
      vq(mbar) + (vq.P.matrix() * sys.Sigma.matrix()).trace();
  return stage_cost_eval(cost, x, u) + sys.gamma * expected;
}

double apply_F_relaxed(const QuadFunction& q, const AffineSystem& sys,
                       const StageCost& cost, const Vector& x,
                       const Vector& u) {
  const ValueQuad vq = minimize_over_u(q);
  const Vector mbar = sys.mean_successor(x, u);
  const double expected =
      vq(mbar) + (q.Qxx() * sys.Sigma.matrix()).trace();
  return stage_cost_eval(cost, x, u) + sys.gamma * expected;
}

}  // namespace affinelp
