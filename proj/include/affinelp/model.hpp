#pragma once

// Affine stochastic plants x+ = A x + B u + c + xi, generalized quadratic
// stage costs, augmented coordinates and the Dataset container.
//
// The disturbance xi is sampled as Gaussian(mu, Sigma). Every closed form in
// the library depends only on (mu, Sigma), so any family matching the first
// two moments yields the same expected quantities; the Gaussian is only the
// sampler used by simulate() and the Monte Carlo checks.

#include <optional>
#include <random>

#include "affinelp/numerics.hpp"

namespace affinelp {

using Rng = std::mt19937_64;

struct AffineSystem {
  Matrix A;
  Matrix B;
  Vector c;
  Vector mu;
  SymMatrix Sigma;
  double gamma = 0.9;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }

  // Dimensions, gamma in (0,1), Sigma PSD within tol. Throws
  // DimensionError / PreconditionError.
  void validate(double psd_tol = 1e-10) const;

  // Deterministic part of the successor: A x + B u + c + mu.
  Vector mean_successor(const Vector& x, const Vector& u) const;
};

// l(x,u) = z^T L z + 2 z^T L_l + Lc with z = [x; u],
// L = [[Lxx, Lxu], [Lxu^T, Luu]], L_l = [Lx; Lu].
struct StageCost {
  Matrix Lxx;
  Matrix Lxu;
  Matrix Luu;
  Vector Lx;
  Vector Lu;
  double Lc = 0.0;

  Eigen::Index n() const { return Lxx.rows(); }
  Eigen::Index m() const { return Luu.rows(); }

  SymMatrix L() const;
  Vector L_linear() const;

  // L symmetric PSD and Luu positive definite.
  void validate(double psd_tol = 1e-10) const;

  // Quadratic cost with L = diag(q I, r I) and no affine terms.
  static StageCost quadratic(Eigen::Index n, Eigen::Index m, double q = 1.0,
                             double r = 1.0);
};

double stage_cost_eval(const StageCost& cost, const Vector& x,
                       const Vector& u);

// Coordinates x~ = [x; 1]. The noise of the augmented plant is centred:
// xi~ = [xi - mu; 0], so mu moves into the last column of Atil.
struct AugmentedSystem {
  Matrix Atil;      // [[A, c + mu], [0, 1]]
  Matrix Btil;      // [[B], [0]]
  SymMatrix SigmaTil;  // [[Sigma, 0], [0, 0]]
  SymMatrix Ltil_xx;   // [[Lxx, Lx], [Lx^T, Lc]]
  Matrix Ltil_xu;   // [[Lxu], [Lu^T]]
  Matrix Luu;
  double gamma = 0.9;

  Eigen::Index n() const { return Atil.rows() - 1; }
  Eigen::Index m() const { return Btil.cols(); }
};

AugmentedSystem augment(const AffineSystem& sys, const StageCost& cost);

// l~(x~, u) = [x~; u]^T [[Ltil_xx, Ltil_xu], [*, Luu]] [x~; u].
double augmented_cost_eval(const AugmentedSystem& aug, const Vector& xtil,
                           const Vector& u);

// Draws xi ~ Gaussian(mu, Sigma) through a cached square-root factor of
// Sigma; handles singular Sigma.
class NoiseSampler {
 public:
  explicit NoiseSampler(const AffineSystem& sys);
  NoiseSampler(const Vector& mu, const SymMatrix& sigma);

  Vector draw(Rng& rng) const;
  // n x count matrix of independent draws.
  Matrix draw_many(Rng& rng, Eigen::Index count) const;

 private:
  Vector mu_;
  Matrix factor_;
};

struct StepResult {
  Vector xplus;
  Vector xi;
};

StepResult step(const AffineSystem& sys, const Vector& x, const Vector& u,
                Rng& rng);

// Column-stacked transitions. Xplus = A X + B U + c 1^T + Omega when the
// data came from simulate().
struct Dataset {
  Matrix X;
  Matrix U;
  Matrix Xplus;
  std::optional<Matrix> Omega;
  std::optional<Matrix> Y;
  bool single_trajectory = false;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index m() const { return U.rows(); }
  Eigen::Index length() const { return X.cols(); }

  // Equal widths, finite entries, chaining when single_trajectory.
  void validate() const;

  // True when Omega is absent or identically zero.
  bool is_deterministic() const;

  // Max |Xplus - A X - B U - c 1^T - Omega| over entries (Omega treated as 0
  // when absent).
  double replay_error(const AffineSystem& sys) const;
};

// Single trajectory of length inputs.cols() starting at x0, with the noise
// record kept in Omega.
Dataset simulate(const AffineSystem& sys, const Vector& x0,
                 const Matrix& inputs, Rng& rng);

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                       double scale = 1.0);
Vector gaussian_vector(Eigen::Index size, Rng& rng, double scale = 1.0);

}  // namespace affinelp
