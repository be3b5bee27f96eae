#include "affinelp/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "affinelp/excitation.hpp"

namespace affinelp {

namespace {

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

Vector assemble_rho(const Matrix& second_moment_diff, const Vector& first_diff,
                    double gamma) {
  const Vector quad = hv_weighted(SymMatrix::from_upper(second_moment_diff));
  Vector rho(quad.size() + first_diff.size() + 1);
  rho << quad, 2.0 * first_diff, 1.0 - gamma;
  return rho;
}

void check_row_dims(const Vector& x, const Vector& u, const Vector& xplus,
                    const Vector& w) {
  if (xplus.size() != x.size() || w.size() != u.size()) {
    throw DimensionError("rho: successor pair does not match (x, u) sizes");
  }
}

Vector target_vector(const Vector& x, const Vector& u, const Vector& w) {
  Vector t(x.size() + u.size() + 1 + w.size());
  t << x, u, 1.0, w;
  return t;
}

}  // namespace

Vector build_rho(const Vector& x, const Vector& u, const Vector& xplus,
                 const Vector& w, double gamma) {
  check_row_dims(x, u, xplus, w);
  const Vector z = concat(x, u);
  const Vector zp = concat(xplus, w);
  return assemble_rho(z * z.transpose() - gamma * zp * zp.transpose(),
                      z - gamma * zp, gamma);
}

Vector quad_features(const Vector& z) {
  return assemble_rho(z * z.transpose(), z, 0.0);
}

Vector rho_from_moments(const Vector& x, const Vector& u,
                        const Vector& xplus_mean, const Matrix& xplus_cov,
                        const Vector& w, double gamma) {
  check_row_dims(x, u, xplus_mean, w);
  if (xplus_cov.rows() != x.size() || xplus_cov.cols() != x.size()) {
    throw DimensionError("rho_from_moments: covariance shape mismatch");
  }
  const Vector z = concat(x, u);
  const Vector zp = concat(xplus_mean, w);
  Matrix second = zp * zp.transpose();
  second.topLeftCorner(x.size(), x.size()) += xplus_cov;
  return assemble_rho(z * z.transpose() - gamma * second, z - gamma * zp,
                      gamma);
}

Vector expected_rho(const AffineSystem& sys, const Vector& x, const Vector& u,
                    const Vector& w, double sigma_scale) {
  return rho_from_moments(x, u, sys.mean_successor(x, u),
                          sigma_scale * sys.Sigma.matrix(), w, sys.gamma);
}

Vector reinit_estimator(const AffineSystem& sys, const Vector& x,
                        const Vector& u, const Vector& w, Eigen::Index count,
                        Rng& rng) {
  if (count < 1) throw PreconditionError("reinit_estimator: count must be >= 1");
  const NoiseSampler sampler(sys);
  const Vector base = sys.A * x + sys.B * u + sys.c;
  Vector sum;
  for (Eigen::Index i = 0; i < count; ++i) {
    const Vector rho = build_rho(x, u, base + sampler.draw(rng), w, sys.gamma);
    if (i == 0) {
      sum = rho;
    } else {
      sum += rho;
    }
  }
  return sum / static_cast<double>(count);
}

Synthesizer::Synthesizer(Dataset ds, Matrix W, double gamma, double rank_tol)
    : ds_(std::move(ds)), W_(std::move(W)), gamma_(gamma) {
  const RankReport rank = rank_condition_report(ds_, W_, rank_tol);
  if (!rank.full) {
    std::ostringstream os;
    os << "rank condition fails: rank [X; U; 1^T; W] = " << rank.rank
       << ", required " << rank.required;
    throw SynthesisError(os.str());
  }
  D_ = stacked_data_matrix(ds_, W_);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(rank_tol);
  cod.compute(D_);
  pinv_ = cod.pseudoInverse();

  // Fixed probe vector so padded alphas are reproducible.
  Rng probe_rng(0x9e3779b97f4a7c15ULL);
  const Vector probe = gaussian_vector(D_.cols(), probe_rng);
  const Vector projected = probe - pinv_ * (D_ * probe);
  if (projected.norm() > 1e-8 * probe.norm()) {
    null_dir_ = projected.normalized();
  }
}

AlphaSolution Synthesizer::alpha(const Vector& x, const Vector& u,
                                 const Vector& w) const {
  if (x.size() != n() || u.size() != m() || w.size() != m()) {
    throw DimensionError("synthesis target has wrong dimensions");
  }
  const Vector t = target_vector(x, u, w);
  AlphaSolution a;
  a.alpha = pinv_ * t;
  a.target = t;
  a.residual = (D_ * a.alpha - t).norm();
  const double scale = std::max({1.0, t.norm(), D_.norm() * a.alpha.norm()});
  if (a.residual > 1e-9 * scale) {
    throw SolveError("synthesis target is not reachable from the data",
                     a.residual);
  }
  a.norm_sq = a.alpha.squaredNorm();
  return a;
}

AlphaSolution Synthesizer::alpha_with_norm(const Vector& x, const Vector& u,
                                           const Vector& w,
                                           double norm_sq) const {
  AlphaSolution a = alpha(x, u, w);
  const double extra = norm_sq - a.norm_sq;
  if (extra < -1e-12 * norm_sq) {
    std::ostringstream os;
    os << "least-norm |alpha|^2 = " << a.norm_sq << " exceeds the common value "
       << norm_sq;
    throw SynthesisError(os.str());
  }
  if (extra <= 0.0) return a;
  if (!has_null_direction()) {
    throw SynthesisError(
        "cannot pad |alpha|^2: the stacked data matrix is square");
  }
  a.padding = std::sqrt(extra);
  a.alpha += a.padding * null_dir_;
  a.norm_sq = a.alpha.squaredNorm();
  a.residual = (D_ * a.alpha - a.target).norm();
  return a;
}

ConstraintRow Synthesizer::row(const Vector& x, const Vector& u,
                               const Vector& w, const AlphaSolution& a,
                               double rhs) const {
  ConstraintRow r;
  r.rho = build_rho(x, u, successor(a), w, gamma_);
  r.rhs = rhs;
  r.meta = {x, u, w, a.norm_sq};
  return r;
}

AlphaSolution solve_alpha(const Dataset& ds, const Matrix& W, const Vector& x,
                          const Vector& u, const Vector& w) {
  return Synthesizer(ds, W, 0.0).alpha(x, u, w);
}

ConstraintRow synthesize_constraint(const Dataset& ds, const Matrix& W,
                                    double gamma, const StageCost& cost,
                                    const Vector& x, const Vector& u,
                                    const Vector& w,
                                    std::optional<double> rhs_override) {
  const Synthesizer synth(ds, W, gamma);
  const double rhs = rhs_override ? *rhs_override : stage_cost_eval(cost, x, u);
  return synth.row(x, u, w, synth.alpha(x, u, w), rhs);
}

BatchResult synthesize_batch(const Synthesizer& synth, const StageCost& cost,
                             const std::vector<Target>& targets,
                             const BatchOptions& opts) {
  BatchResult out;
  out.status.resize(targets.size());
  std::vector<std::optional<AlphaSolution>> alphas(targets.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Target& t = targets[i];
    try {
      alphas[i] = synth.alpha(t.x, t.u, t.w);
      lo = std::min(lo, alphas[i]->norm_sq);
      hi = std::max(hi, alphas[i]->norm_sq);
    } catch (const Error& e) {
      out.status[i] = {false, e.what()};
    }
  }
  if (hi == 0.0) lo = 0.0;
  out.least_norm_min = lo;
  out.least_norm_max = hi;
  const double spread = hi > 0.0 ? (hi - lo) / hi : 0.0;
  const bool deterministic = synth.dataset().is_deterministic();

  const bool pad = opts.mode == NormMode::equalize_norm &&
                   spread > opts.spread_tol && !deterministic;
  if (opts.mode == NormMode::equalize_norm && !deterministic) {
    out.common_norm_sq = hi;
  }

  double acc_lo = std::numeric_limits<double>::infinity();
  double acc_hi = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!alphas[i]) continue;
    const Target& t = targets[i];
    try {
      const AlphaSolution a =
          pad ? synth.alpha_with_norm(t.x, t.u, t.w, hi) : *alphas[i];
      out.rows.push_back(
          synth.row(t.x, t.u, t.w, a, stage_cost_eval(cost, t.x, t.u)));
      acc_lo = std::min(acc_lo, a.norm_sq);
      acc_hi = std::max(acc_hi, a.norm_sq);
    } catch (const Error& e) {
      out.status[i] = {false, e.what()};
    }
  }
  out.spread = acc_hi > 0.0 ? (acc_hi - acc_lo) / acc_hi : 0.0;
  out.mixed_covariance = !deterministic && out.spread > opts.spread_tol;
  return out;
}

BatchResult synthesize_batch(const Dataset& ds, const Matrix& W, double gamma,
                             const StageCost& cost,
                             const std::vector<Target>& targets,
                             const BatchOptions& opts) {
  return synthesize_batch(Synthesizer(ds, W, gamma), cost, targets, opts);
}

Matrix regenerate_successors(const AffineSystem& sys, const Matrix& X,
                             const Matrix& U, Eigen::Index count, Rng& rng) {
  if (count < 1) throw PreconditionError("regenerate_successors: count < 1");
  if (X.cols() != U.cols()) throw DimensionError("X and U widths differ");
  const Eigen::Index n = sys.n();
  const Matrix base = sys.A * X + sys.B * U + sys.c.replicate(1, X.cols());
  const NoiseSampler sampler(sys);
  Matrix out(count * n, X.cols());
  for (Eigen::Index r = 0; r < count; ++r) {
    out.middleRows(r * n, n) = base + sampler.draw_many(rng, X.cols());
  }
  return out;
}

ExpectedRowSource::ExpectedRowSource(AffineSystem sys, StageCost cost,
                                     double sigma_scale)
    : sys_(std::move(sys)), cost_(std::move(cost)), sigma_scale_(sigma_scale) {
  sys_.validate();
  cost_.validate();
}

Vector ExpectedRowSource::successor(const Vector& x, const Vector& u) const {
  return sys_.mean_successor(x, u);
}

ConstraintRow ExpectedRowSource::row(const Vector& x, const Vector& u,
                                     const Vector& w) const {
  ConstraintRow r;
  r.rho = expected_rho(sys_, x, u, w, sigma_scale_);
  r.rhs = stage_cost_eval(cost_, x, u);
  r.meta = {x, u, w, std::nullopt};
  return r;
}

DataRowSource::DataRowSource(std::shared_ptr<const Synthesizer> synth,
                             StageCost cost,
                             std::optional<double> common_norm_sq,
                             const std::optional<Matrix>& stacked_xplus)
    : synth_(std::move(synth)),
      cost_(std::move(cost)),
      common_norm_sq_(common_norm_sq) {
  if (!synth_) throw PreconditionError("DataRowSource: null synthesizer");
  const Matrix& stacked =
      stacked_xplus ? *stacked_xplus : synth_->dataset().Xplus;
  if (stacked.cols() != synth_->dataset().length() || stacked.rows() == 0 ||
      stacked.rows() % n() != 0) {
    throw DimensionError("DataRowSource: successor realization shape");
  }
  realizations_ = stacked.rows() / n();
  succ_map_ = stacked * synth_->pseudo_inverse();
  if (synth_->has_null_direction()) {
    succ_pad_ = stacked * synth_->null_direction();
  }
}

Vector DataRowSource::successors(const AlphaSolution& a) const {
  Vector all = succ_map_ * a.target;
  if (a.padding != 0.0) all += a.padding * succ_pad_;
  return all;
}

AlphaSolution DataRowSource::alpha_for(const Vector& x, const Vector& u,
                                       const Vector& w) const {
  return common_norm_sq_ ? synth_->alpha_with_norm(x, u, w, *common_norm_sq_)
                         : synth_->alpha(x, u, w);
}

Vector DataRowSource::successor(const Vector& x, const Vector& u) const {
  const AlphaSolution a = synth_->alpha(x, u, Vector::Zero(m()));
  return successors(a).reshaped(n(), realizations_).rowwise().mean();
}

ConstraintRow DataRowSource::row(const Vector& x, const Vector& u,
                                 const Vector& w) const {
  const AlphaSolution a = alpha_for(x, u, w);
  ConstraintRow r;
  if (realizations_ == 1) {
    r.rho = build_rho(x, u, successors(a), w, synth_->gamma());
  } else {
    // Mean of rho over realizations: rho is affine in (x+, x+ x+^T).
    const Vector all = successors(a);
    const auto succ = all.reshaped(n(), realizations_);
    const Vector mean = succ.rowwise().mean();
    const Matrix centered = succ.colwise() - mean;
    const Matrix cov = centered * centered.transpose() /
                       static_cast<double>(realizations_);
    r.rho = rho_from_moments(x, u, mean, cov, w, synth_->gamma());
  }
  r.rhs = stage_cost_eval(cost_, x, u);
  r.meta = {x, u, w, a.norm_sq};
  return r;
}

}  // namespace affinelp
