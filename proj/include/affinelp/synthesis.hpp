#pragma once

// Bellman-inequality rows for the relaxed Q-LP.
//
// A row rho satisfies rho^T theta(q) = q(x,u) - gamma q(x+, w) for every
// generalized quadratic q with theta(q) = [hv(Q); Ql; Qc]:
//
//   rho = [ hv_weighted(z z^T - gamma z+ z+^T) ;
//           2 (z - gamma z+)                   ;
//           1 - gamma                          ],   z = [x;u], z+ = [x+;w].
//
// The factor 2 on the middle block matches the 2 z^T Ql term of q.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "affinelp/model.hpp"

namespace affinelp {

struct ConstraintMeta {
  Vector x;
  Vector u;
  Vector w;
  std::optional<double> alpha_norm_sq;
};

// rho^T theta <= rhs.
struct ConstraintRow {
  Vector rho;
  double rhs = 0.0;
  ConstraintMeta meta;
};

Vector build_rho(const Vector& x, const Vector& u, const Vector& xplus,
                 const Vector& w, double gamma);

// Features [hv_weighted(z z^T); 2 z; 1] with sigma^T theta(q) = q(z).
Vector quad_features(const Vector& z);

// E[rho] when x+ has the given mean and covariance.
Vector rho_from_moments(const Vector& x, const Vector& u,
                        const Vector& xplus_mean, const Matrix& xplus_cov,
                        const Vector& w, double gamma);

// E[rho] for x+ = A x + B u + c + xi, xi with mean mu and covariance
// sigma_scale * Sigma.
Vector expected_rho(const AffineSystem& sys, const Vector& x, const Vector& u,
                    const Vector& w, double sigma_scale = 1.0);

// Mean of `count` rho samples drawn by restarting the plant at (x,u).
Vector reinit_estimator(const AffineSystem& sys, const Vector& x,
                        const Vector& u, const Vector& w, Eigen::Index count,
                        Rng& rng);

struct AlphaSolution {
  Vector alpha;
  double norm_sq = 0.0;
  double residual = 0.0;
  // Target vector [x; u; 1; w] and the coefficient on the null direction:
  // alpha = pinv * target + padding * null_direction.
  Vector target;
  double padding = 0.0;
};

// Combines data columns: [X; U; 1^T; W] alpha = [x; u; 1; w]. Holds one
// factorization of the stacked matrix so many targets are cheap.
class Synthesizer {
 public:
  // Throws SynthesisError when the rank condition fails.
  Synthesizer(Dataset ds, Matrix W, double gamma,
              double rank_tol = kDefaultRankTol);

  const Dataset& dataset() const { return ds_; }
  const Matrix& W() const { return W_; }
  double gamma() const { return gamma_; }
  Eigen::Index n() const { return ds_.n(); }
  Eigen::Index m() const { return ds_.m(); }
  // Whether alphas can be padded to a larger norm (d > n + 2m + 1).
  bool has_null_direction() const { return null_dir_.size() > 0; }
  const Matrix& pseudo_inverse() const { return pinv_; }
  const Vector& null_direction() const { return null_dir_; }

  AlphaSolution alpha(const Vector& x, const Vector& u, const Vector& w) const;
  // Least-norm alpha plus a null-space component so |alpha|^2 = norm_sq.
  // Throws SynthesisError when the least-norm solution is already longer or
  // there is no null direction.
  AlphaSolution alpha_with_norm(const Vector& x, const Vector& u,
                                const Vector& w, double norm_sq) const;

  // X+ alpha, the synthesized successor.
  Vector successor(const AlphaSolution& a) const { return ds_.Xplus * a.alpha; }

  ConstraintRow row(const Vector& x, const Vector& u, const Vector& w,
                    const AlphaSolution& a, double rhs) const;

 private:
  Dataset ds_;
  Matrix W_;
  double gamma_;
  Matrix D_;
  Matrix pinv_;
  Vector null_dir_;
};

AlphaSolution solve_alpha(const Dataset& ds, const Matrix& W, const Vector& x,
                          const Vector& u, const Vector& w);

// rho(x, u, X+ alpha, w) with rhs l(x,u), or rhs_override when given
// (observed-cost variant).
ConstraintRow synthesize_constraint(const Dataset& ds, const Matrix& W,
                                    double gamma, const StageCost& cost,
                                    const Vector& x, const Vector& u,
                                    const Vector& w,
                                    std::optional<double> rhs_override = {});

struct Target {
  Vector x;
  Vector u;
  Vector w;
};

enum class NormMode { equalize_norm, free };

struct BatchOptions {
  NormMode mode = NormMode::equalize_norm;
  // Allowed relative spread (max - min) / max of |alpha|^2.
  double spread_tol = 0.05;
};

struct RowStatus {
  bool ok = true;
  std::string message;
};

struct BatchResult {
  std::vector<ConstraintRow> rows;       // accepted rows only
  std::vector<RowStatus> status;         // one per target
  double least_norm_min = 0.0;           // over least-norm |alpha|^2
  double least_norm_max = 0.0;
  double spread = 0.0;                   // of the accepted rows' |alpha|^2
  std::optional<double> common_norm_sq;  // set when equalized
  bool mixed_covariance = false;
};

// free: least-norm alphas, each row carrying its own |alpha|^2.
// equalize_norm: if the least-norm spread exceeds spread_tol, pads every
// alpha up to the largest least-norm |alpha|^2 through the null space; rows
// that cannot be padded are rejected and reported per row.
BatchResult synthesize_batch(const Synthesizer& synth, const StageCost& cost,
                             const std::vector<Target>& targets,
                             const BatchOptions& opts = {});
BatchResult synthesize_batch(const Dataset& ds, const Matrix& W, double gamma,
                             const StageCost& cost,
                             const std::vector<Target>& targets,
                             const BatchOptions& opts = {});

// Row oracle consumed by the constraint-generation loop in lp.
class RowSource {
 public:
  virtual ~RowSource() = default;
  virtual Eigen::Index n() const = 0;
  virtual Eigen::Index m() const = 0;
  virtual double gamma() const = 0;
  // Estimate of the successor mean at (x,u), used to pick greedy w and to
  // extend rollouts.
  virtual Vector successor(const Vector& x, const Vector& u) const = 0;
  // Throws SynthesisError when (x,u,w) cannot be synthesized.
  virtual ConstraintRow row(const Vector& x, const Vector& u,
                            const Vector& w) const = 0;
};

// Exact expected rows from a known model, noise covariance scaled by
// sigma_scale (1 for q_hat, |alpha|^2 for the biased fixed point).
class ExpectedRowSource : public RowSource {
 public:
  ExpectedRowSource(AffineSystem sys, StageCost cost, double sigma_scale = 1.0);
  Eigen::Index n() const override { return sys_.n(); }
  Eigen::Index m() const override { return sys_.m(); }
  double gamma() const override { return sys_.gamma; }
  Vector successor(const Vector& x, const Vector& u) const override;
  ConstraintRow row(const Vector& x, const Vector& u,
                    const Vector& w) const override;

 private:
  AffineSystem sys_;
  StageCost cost_;
  double sigma_scale_;
};

// Successor matrices A X + B U + c 1^T + Omega_r for `count` independent
// noise records, stacked vertically: realization r occupies rows
// [r n, (r+1) n).
Matrix regenerate_successors(const AffineSystem& sys, const Matrix& X,
                             const Matrix& U, Eigen::Index count, Rng& rng);

// Rows synthesized from data. With several successor realizations (same
// design X, U, W; regenerated noise, stacked as above) the row is the mean of
// the synthesized rows. When common_norm_sq is set every alpha is padded to
// that norm.
class DataRowSource : public RowSource {
 public:
  DataRowSource(std::shared_ptr<const Synthesizer> synth, StageCost cost,
                std::optional<double> common_norm_sq = {},
                const std::optional<Matrix>& stacked_xplus = {});
  Eigen::Index n() const override { return synth_->n(); }
  Eigen::Index m() const override { return synth_->m(); }
  double gamma() const override { return synth_->gamma(); }
  Vector successor(const Vector& x, const Vector& u) const override;
  ConstraintRow row(const Vector& x, const Vector& u,
                    const Vector& w) const override;

 private:
  AlphaSolution alpha_for(const Vector& x, const Vector& u,
                          const Vector& w) const;
  // All realizations of X+ alpha stacked, (R n).
  Vector successors(const AlphaSolution& a) const;

  std::shared_ptr<const Synthesizer> synth_;
  StageCost cost_;
  std::optional<double> common_norm_sq_;
  // Realizations stacked vertically, (R n) x d, times pinv and null_dir.
  Matrix succ_map_;
  Vector succ_pad_;
  Eigen::Index realizations_ = 1;
};

}  // namespace affinelp
