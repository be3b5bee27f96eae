#pragma once

// Closed-form fixed points for affine dynamics with generalized quadratic
// cost: augmented Riccati equation, optimal value and Q-functions, the
// relaxed and biased Q fixed points, the optimal affine policy, and direct
// evaluations of the Bellman operators used for residual checks.

#include <cstddef>
#include <optional>

#include "affinelp/model.hpp"

namespace affinelp {

// q(x,u) = z^T Q z + 2 z^T Ql + Qc,  z = [x; u].
struct QuadFunction {
  SymMatrix Q;
  Vector Ql;
  double Qc = 0.0;
  Eigen::Index nx = 0;  // state dimension; z has Q.dim() entries

  Eigen::Index nu() const { return Q.dim() - nx; }

  double operator()(const Vector& x, const Vector& u) const;
  double eval(const Vector& z) const;

  Matrix Qxx() const { return Q.matrix().topLeftCorner(nx, nx); }
  Matrix Qxu() const { return Q.matrix().topRightCorner(nx, nu()); }
  Matrix Quu() const { return Q.matrix().bottomRightCorner(nu(), nu()); }
  Vector qx() const { return Ql.head(nx); }
  Vector qu() const { return Ql.tail(nu()); }

  // Parameter vector [hv(Q); Ql; Qc] of length (k+1)(k+2)/2, k = n + m.
  Vector theta() const;
  static QuadFunction from_theta(const Vector& theta, Eigen::Index nx,
                                 Eigen::Index nu);
};

inline Eigen::Index quad_param_count(Eigen::Index n, Eigen::Index m) {
  return (n + m + 1) * (n + m + 2) / 2;
}

// v(x) = x^T P x + 2 x^T Pl + Pc + noise_offset.
struct ValueQuad {
  SymMatrix P;
  Vector Pl;
  double Pc = 0.0;
  double noise_offset = 0.0;

  double operator()(const Vector& x) const;

  // [hv(P); Pl; Pc + noise_offset], the value-LP parametrization.
  Vector theta() const;
  static ValueQuad from_theta(const Vector& theta, Eigen::Index nx);
};

// u = K x + k.
struct AffinePolicy {
  Matrix K;
  Vector k;

  Vector operator()(const Vector& x) const { return K * x + k; }
};

struct AreOptions {
  double tol = 1e-10;
  std::size_t max_iter = 1000000;
};

struct AreSolution {
  SymMatrix Ptil;   // (n+1) x (n+1)
  SymMatrix qtil;   // (n+1) x (n+1), state-state block of the Q matrix
  Matrix qtil_l;    // (n+1) x m
  Matrix qtil_c;    // m x m
  std::size_t iterations = 0;
  double residual = 0.0;
};

// One application of the discounted Riccati map in augmented coordinates.
// Throws ConditioningError when Luu + gamma Btil^T P Btil is not PD.
SymMatrix riccati_map(const AugmentedSystem& aug, const SymMatrix& Ptil);

// Frobenius norm of P - riccati_map(P).
double are_residual(const AugmentedSystem& aug, const SymMatrix& Ptil);

// Value iteration of the Riccati map from `initial` (default Ltil_xx).
AreSolution solve_augmented_are(const AugmentedSystem& aug,
                                const AreOptions& opts = {},
                                const std::optional<SymMatrix>& initial = {});

// PBH test on (sqrt(gamma) A, sqrt(gamma) B) restricted to eigenvalues of
// modulus >= 1.
bool is_stabilizable(const AffineSystem& sys, double rel_tol = kDefaultRankTol);
bool is_controllable(const Matrix& A, const Matrix& B,
                     double rel_tol = kDefaultRankTol);

// Everything derived from one ARE solve. Throws PreconditionError when the
// system is not stabilizable or the cost is invalid.
struct FixedPoints {
  AreSolution are;
  ValueQuad v_star;
  QuadFunction q_star;
  QuadFunction q_hat;
  AffinePolicy policy;
  double relaxed_offset = 0.0;  // q_hat - q_star
};

FixedPoints compute_fixed_points(const AffineSystem& sys,
                                 const StageCost& cost,
                                 const AreOptions& opts = {});

ValueQuad optimal_value(const AffineSystem& sys, const StageCost& cost,
                        const AreOptions& opts = {});
QuadFunction optimal_q(const AffineSystem& sys, const StageCost& cost,
                       const AreOptions& opts = {});
QuadFunction relaxed_q(const AffineSystem& sys, const StageCost& cost,
                       const AreOptions& opts = {});
// gamma Tr(q_l q_c^{-1} q_l^T Sigma) / (1 - gamma) for a Q-function.
double relaxed_offset(const QuadFunction& q_star, const AffineSystem& sys);
// Fixed point under constraints whose noise covariance is scaled by
// alpha_norm_sq; differs from q_hat by a constant.
QuadFunction biased_q(const AffineSystem& sys, const StageCost& cost,
                      double alpha_norm_sq, const AreOptions& opts = {});
QuadFunction biased_q(const FixedPoints& fp, const AffineSystem& sys,
                      double alpha_norm_sq);
AffinePolicy optimal_policy(const AffineSystem& sys, const StageCost& cost,
                            const AreOptions& opts = {});
// Policy formula written directly in (P*, Pl*, q-blocks) of the value
// function: K = -qc^{-1} ql^T, k = -qc^{-1}(Lu + gamma B^T (Pl + P(c+mu))).
AffinePolicy policy_from_value(const ValueQuad& v, const AffineSystem& sys,
                               const StageCost& cost);

// (T_l v)(x,u) = l(x,u) + gamma E[v(A x + B u + c + xi)].
double apply_T_linear(const ValueQuad& v, const AffineSystem& sys,
                      const StageCost& cost, const Vector& x, const Vector& u);
// argmin_u (T_l v)(x, u). Throws ConditioningError if the u-Hessian is not PD.
AffinePolicy greedy_policy(const ValueQuad& v, const AffineSystem& sys,
                           const StageCost& cost);
// (T v)(x) = min_u (T_l v)(x,u).
double apply_T(const ValueQuad& v, const AffineSystem& sys,
               const StageCost& cost, const Vector& x);

// min_u q(x,u) as a value function (noise_offset = 0). Throws
// ConditioningError when Quu is not PD.
ValueQuad minimize_over_u(const QuadFunction& q);
// argmin_u q(x,u); same precondition.
AffinePolicy argmin_policy(const QuadFunction& q);

// (F q)(x,u) = l(x,u) + gamma E[min_w q(x+, w)].
double apply_F(const QuadFunction& q, const AffineSystem& sys,
               const StageCost& cost, const Vector& x, const Vector& u);
// (F^ q)(x,u) = l(x,u) + gamma min_w E[q(x+, w)].
double apply_F_relaxed(const QuadFunction& q, const AffineSystem& sys,
                       const StageCost& cost, const Vector& x,
                       const Vector& u);

}  // namespace affinelp
