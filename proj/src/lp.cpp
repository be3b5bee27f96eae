#include "affinelp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace affinelp {

namespace {

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

Vector state_features(const Vector& x) { return quad_features(x); }

Vector expected_state_features(const AffineSystem& sys, const Vector& x,
                               const Vector& u) {
  const Vector mean = sys.mean_successor(x, u);
  const Vector quad = hv_weighted(
      SymMatrix::from_upper(mean * mean.transpose() + sys.Sigma.matrix()));
  Vector f(quad.size() + mean.size() + 1);
  f << quad, 2.0 * mean, 1.0;
  return f;
}

bool spread_exceeds(const std::vector<ConstraintRow>& rows, double tol) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const ConstraintRow& r : rows) {
    if (!r.meta.alpha_norm_sq) continue;
    lo = std::min(lo, *r.meta.alpha_norm_sq);
    hi = std::max(hi, *r.meta.alpha_norm_sq);
  }
  return hi > 0.0 && (hi - lo) / hi > tol;
}

// Revised simplex for  min c^T lambda  s.t.  A lambda = rhs, lambda >= 0,
// where the first N columns of A are given and p artificial columns
// sign(rhs_i) e_i are appended. The basis inverse is kept explicitly and
// refactored periodically.
class DualSimplex {
 public:
  enum class Outcome { optimal, unbounded };

  DualSimplex(const Matrix& cols, const Vector& rhs, const SolverOptions& opts,
              std::size_t& pivots)
      : opts_(opts), pivots_(pivots), p_(cols.rows()), n_real_(cols.cols()) {
    A_.resize(p_, n_real_ + p_);
    A_.leftCols(n_real_) = cols;
    A_.rightCols(p_).setZero();
    for (Eigen::Index i = 0; i < p_; ++i) {
      A_(i, n_real_ + i) = rhs(i) < 0.0 ? -1.0 : 1.0;
    }
    rhs_ = rhs;
    basis_.resize(p_);
    is_basic_.assign(static_cast<std::size_t>(n_real_ + p_), false);
    for (Eigen::Index i = 0; i < p_; ++i) {
      basis_[i] = n_real_ + i;
      is_basic_[n_real_ + i] = true;
    }
    refactor();
  }

  // Phase I: returns the remaining artificial mass.
  double phase_one() {
    Vector cost = Vector::Zero(n_real_ + p_);
    cost.tail(p_).setOnes();
    iterate(cost, n_real_ + p_);
    double mass = 0.0;
    for (Eigen::Index i = 0; i < p_; ++i) {
      if (basis_[i] >= n_real_) mass += std::max(0.0, x_b_(i));
    }
    return mass;
  }

  void drive_out_artificials() {
    for (Eigen::Index r = 0; r < p_; ++r) {
      if (basis_[r] < n_real_) continue;
      const Eigen::RowVectorXd row = binv_.row(r) * A_.leftCols(n_real_);
      Eigen::Index best = -1;
      double best_abs = 1e-9;
      for (Eigen::Index j = 0; j < n_real_; ++j) {
        if (is_basic_[j]) continue;
        if (std::abs(row(j)) > best_abs) {
          best_abs = std::abs(row(j));
          best = j;
        }
      }
      if (best >= 0) pivot(r, best, binv_ * A_.col(best));
    }
  }

  Outcome phase_two(const Vector& real_cost) {
    Vector cost = Vector::Zero(n_real_ + p_);
    cost.head(n_real_) = real_cost;
    return iterate(cost, n_real_);
  }

  // Simplex multipliers y with B^T y = c_B, recomputed from a fresh
  // factorization.
  Vector multipliers(const Vector& real_cost) {
    Vector cost = Vector::Zero(n_real_ + p_);
    cost.head(n_real_) = real_cost;
    Matrix basis_matrix(p_, p_);
    Vector c_b(p_);
    for (Eigen::Index i = 0; i < p_; ++i) {
      basis_matrix.col(i) = A_.col(basis_[i]);
      c_b(i) = cost(basis_[i]);
    }
    return basis_matrix.transpose().partialPivLu().solve(c_b);
  }

 private:
  static constexpr std::size_t kRefactorEvery = 50;
  static constexpr double kPivotTol = 1e-11;

  void refactor() {
    Matrix basis_matrix(p_, p_);
    for (Eigen::Index i = 0; i < p_; ++i) basis_matrix.col(i) = A_.col(basis_[i]);
    Eigen::PartialPivLU<Matrix> lu(basis_matrix);
    binv_ = lu.inverse();
    x_b_ = binv_ * rhs_;
    since_refactor_ = 0;
  }

  void pivot(Eigen::Index r, Eigen::Index entering, const Vector& dir) {
    const double piv = dir(r);
    const double t = x_b_(r) / piv;
    x_b_ -= t * dir;
    x_b_(r) = t;
    binv_.row(r) /= piv;
    for (Eigen::Index i = 0; i < p_; ++i) {
      if (i != r && dir(i) != 0.0) binv_.row(i) -= dir(i) * binv_.row(r);
    }
    is_basic_[basis_[r]] = false;
    basis_[r] = entering;
    is_basic_[entering] = true;
    ++since_refactor_;
    if (++pivots_ > opts_.max_pivots) {
      std::ostringstream os;
      os << "simplex pivot limit " << opts_.max_pivots << " reached (p = " << p_
         << ", rows = " << n_real_ << ")";
      throw NumericalError(os.str());
    }
  }

  // Columns with index >= allowed never enter.
  Outcome iterate(const Vector& cost, Eigen::Index allowed) {
    std::size_t degenerate_run = 0;
    while (true) {
      if (since_refactor_ >= kRefactorEvery) refactor();
      Vector c_b(p_);
      for (Eigen::Index i = 0; i < p_; ++i) c_b(i) = cost(basis_[i]);
      const Vector y = binv_.transpose() * c_b;
      const Vector reduced =
          cost.head(allowed) - A_.leftCols(allowed).transpose() * y;

      const bool bland = degenerate_run >= opts_.degenerate_limit;
      Eigen::Index entering = -1;
      double best = 0.0;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (is_basic_[j]) continue;
        const double d = reduced(j);
        if (d >= -opts_.tol * (1.0 + std::abs(cost(j)))) continue;
        if (bland) {
          entering = j;
          break;
        }
        if (d < best) {
          best = d;
          entering = j;
        }
      }
      if (entering < 0) return Outcome::optimal;

      const Vector dir = binv_ * A_.col(entering);
      Eigen::Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < p_; ++i) {
        if (dir(i) <= kPivotTol) continue;
        const double r = std::max(0.0, x_b_(i)) / dir(i);
        const double tie = 1e-12 * (1.0 + std::abs(ratio));
        if (leave < 0 || r < ratio - tie) {
          ratio = r;
          leave = i;
        } else if (r <= ratio + tie) {
          const bool prefer = bland ? basis_[i] < basis_[leave]
                                    : dir(i) > dir(leave);
          if (prefer) {
            ratio = std::min(ratio, r);
            leave = i;
          }
        }
      }
      if (leave < 0) return Outcome::unbounded;
      degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leave, entering, dir);
    }
  }

  const SolverOptions& opts_;
  std::size_t& pivots_;
  Eigen::Index p_;
  Eigen::Index n_real_;
  Matrix A_;
  Vector rhs_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> is_basic_;
  Matrix binv_;
  Vector x_b_;
  std::size_t since_refactor_ = 0;
};

// The dual LP of  max s^T th  s.t.  R th <= b  is  min b^T l, R^T l = s,
// l >= 0. Returns the multipliers (= th) when both phases finish, nullopt
// when the dual is infeasible, and sets dual_unbounded when phase II finds a
// ray.
std::optional<Vector> solve_dual(const Matrix& rows, const Vector& rhs,
                                 const Vector& objective,
                                 const SolverOptions& opts,
                                 std::size_t& pivots, bool& dual_unbounded) {
  dual_unbounded = false;
  DualSimplex simplex(rows.transpose(), objective, opts, pivots);
  const double mass = simplex.phase_one();
  if (mass > opts.tol * (1.0 + objective.lpNorm<1>())) return std::nullopt;
  simplex.drive_out_artificials();
  if (simplex.phase_two(rhs) == DualSimplex::Outcome::unbounded) {
    dual_unbounded = true;
    return std::nullopt;
  }
  return simplex.multipliers(rhs);
}

}  // namespace

void LPProblem::validate() const {
  if (objective.size() != decision_dim) {
    throw DimensionError("LP objective length differs from decision_dim");
  }
  require_finite(objective, "LP objective");
  for (const ConstraintRow& r : rows) {
    if (r.rho.size() != decision_dim) {
      throw DimensionError("LP row length differs from decision_dim");
    }
    require_finite(r.rho, "LP row");
    if (!std::isfinite(r.rhs)) throw DimensionError("LP rhs is not finite");
  }
  if (bound && !(*bound > 0.0)) {
    throw DimensionError("LP box bound must be positive");
  }
}

std::string to_string(LPStatus s) {
  switch (s) {
    case LPStatus::optimal:
      return "optimal";
    case LPStatus::unbounded:
      return "unbounded";
    case LPStatus::infeasible:
      return "infeasible";
    case LPStatus::bound_active:
      return "bound_active";
  }
  return "unknown";
}

LPStatus lp_status_from_string(const std::string& s) {
  for (LPStatus st : {LPStatus::optimal, LPStatus::unbounded,
                      LPStatus::infeasible, LPStatus::bound_active}) {
    if (to_string(st) == s) return st;
  }
  throw FormatError("unknown LP status '" + s + "'");
}

Vector build_objective(const std::vector<StateInput>& samples,
                       const std::vector<double>& weights) {
  if (samples.empty()) throw PreconditionError("build_objective: no samples");
  if (!weights.empty() && weights.size() != samples.size()) {
    throw DimensionError("build_objective: one weight per sample required");
  }
  double total = 0.0;
  Vector sigma;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double wgt = weights.empty() ? 1.0 : weights[i];
    if (wgt < 0.0) throw PreconditionError("build_objective: negative weight");
    const Vector f = quad_features(concat(samples[i].x, samples[i].u));
    if (i == 0) {
      sigma = wgt * f;
    } else {
      if (f.size() != sigma.size()) {
        throw DimensionError("build_objective: samples differ in size");
      }
      sigma += wgt * f;
    }
    total += wgt;
  }
  if (!(total > 0.0)) throw PreconditionError("build_objective: zero weights");
  return sigma / total;
}

Vector build_value_objective(const std::vector<Vector>& states) {
  if (states.empty()) throw PreconditionError("build_value_objective: no states");
  Vector sigma = Vector::Zero(quad_features(states.front()).size());
  for (const Vector& x : states) sigma += state_features(x);
  return sigma / static_cast<double>(states.size());
}

LPProblem build_relaxed_qlp(std::vector<ConstraintRow> rows, Vector objective,
                            std::optional<double> bound) {
  if (rows.empty()) throw PreconditionError("relaxed Q-LP needs at least one row");
  LPProblem lp;
  lp.decision_dim = objective.size();
  lp.objective = std::move(objective);
  lp.bound = bound;
  std::set<std::vector<double>> seen;
  for (ConstraintRow& r : rows) {
    std::vector<double> key(r.rho.data(), r.rho.data() + r.rho.size());
    key.push_back(r.rhs);
    if (seen.insert(std::move(key)).second) lp.rows.push_back(std::move(r));
  }
  lp.mixed_covariance = spread_exceeds(lp.rows, 0.05);
  lp.validate();
  return lp;
}

ConstraintRow value_row(const AffineSystem& sys, const StageCost& cost,
                        const Vector& x, const Vector& u) {
  ConstraintRow r;
  r.rho = state_features(x) - sys.gamma * expected_state_features(sys, x, u);
  r.rhs = stage_cost_eval(cost, x, u);
  r.meta = {x, u, Vector(), std::nullopt};
  return r;
}

LPProblem build_value_lp(const AffineSystem& sys, const StageCost& cost,
                         const std::vector<StateInput>& grid,
                         std::optional<Vector> objective,
                         std::optional<double> bound) {
  if (grid.empty()) throw PreconditionError("value LP needs a nonempty grid");
  LPProblem lp;
  lp.decision_dim = hv_size(sys.n()) + sys.n() + 1;
  if (objective) {
    lp.objective = *objective;
  } else {
    std::vector<Vector> states;
    for (const StateInput& s : grid) states.push_back(s.x);
    lp.objective = build_value_objective(states);
  }
  lp.bound = bound;
  for (const StateInput& s : grid) lp.rows.push_back(value_row(sys, cost, s.x, s.u));
  lp.validate();
  return lp;
}

ConstraintRow vq_bellman_row(const AffineSystem& sys, const StageCost& cost,
                             const Vector& x, const Vector& u) {
  ConstraintRow r;
  r.rho = concat(quad_features(concat(x, u)),
                 -sys.gamma * expected_state_features(sys, x, u));
  r.rhs = stage_cost_eval(cost, x, u);
  r.meta = {x, u, Vector(), std::nullopt};
  return r;
}

ConstraintRow vq_link_row(const Vector& x, const Vector& u) {
  ConstraintRow r;
  r.rho = concat(-quad_features(concat(x, u)), state_features(x));
  r.rhs = 0.0;
  r.meta = {x, u, Vector(), std::nullopt};
  return r;
}

LPProblem build_vq_lp(const AffineSystem& sys, const StageCost& cost,
                      const std::vector<StateInput>& grid,
                      std::optional<Vector> objective,
                      std::optional<double> bound) {
  if (grid.empty()) throw PreconditionError("v/q LP needs a nonempty grid");
  const Eigen::Index p = quad_param_count(sys.n(), sys.m());
  const Eigen::Index pv = hv_size(sys.n()) + sys.n() + 1;
  LPProblem lp;
  lp.decision_dim = p + pv;
  lp.objective = Vector::Zero(p + pv);
  lp.objective.head(p) = objective ? *objective : build_objective(grid);
  lp.bound = bound;
  for (const StateInput& s : grid) {
    lp.rows.push_back(vq_bellman_row(sys, cost, s.x, s.u));
    lp.rows.push_back(vq_link_row(s.x, s.u));
  }
  lp.validate();
  return lp;
}

LPSolution solve(const LPProblem& lp, const SolverOptions& opts) {
  lp.validate();
  const Eigen::Index p = lp.decision_dim;
  const Eigen::Index n_box = lp.bound ? 2 * p : 0;
  const Eigen::Index n_rows = static_cast<Eigen::Index>(lp.rows.size()) + n_box;

  // Rows scaled to unit 2-norm; zero rows become feasibility checks.
  Matrix R(n_rows, p);
  Vector b(n_rows);
  Eigen::Index k = 0;
  for (const ConstraintRow& r : lp.rows) {
    const double nrm = r.rho.norm();
    if (nrm == 0.0) {
      if (r.rhs < -opts.tol) return {Vector(), LPStatus::infeasible, 0.0, 0};
      continue;
    }
    R.row(k) = r.rho.transpose() / nrm;
    b(k) = r.rhs / nrm;
    ++k;
  }
  for (Eigen::Index i = 0; i < n_box; ++i) {
    R.row(k).setZero();
    R(k, i / 2) = (i % 2 == 0) ? 1.0 : -1.0;
    b(k) = *lp.bound;
    ++k;
  }
  R.conservativeResize(k, p);
  b.conservativeResize(k);

  LPSolution sol;
  std::size_t pivots = 0;
  bool dual_unbounded = false;
  std::optional<Vector> theta =
      k > 0 ? solve_dual(R, b, lp.objective, opts, pivots, dual_unbounded)
            : std::nullopt;
  if (!theta) {
    if (dual_unbounded) {
      sol.status = LPStatus::infeasible;
    } else if (k == 0) {
      sol.status =
          lp.objective.isZero() ? LPStatus::optimal : LPStatus::unbounded;
      if (sol.status == LPStatus::optimal) sol.theta = Vector::Zero(p);
    } else {
      // Dual infeasible: primal is unbounded if feasible at all.
      bool ray = false;
      const Vector zero = Vector::Zero(p);
      const std::optional<Vector> feasible =
          solve_dual(R, b, zero, opts, pivots, ray);
      sol.status = ray || !feasible ? LPStatus::infeasible : LPStatus::unbounded;
    }
    sol.iterations = pivots;
    return sol;
  }
  sol.theta = *theta;
  sol.iterations = pivots;
  sol.objective_value = lp.objective.dot(sol.theta);
  sol.status = LPStatus::optimal;
  if (lp.bound) {
    const double edge = *lp.bound * (1.0 - 1e-9);
    if (sol.theta.cwiseAbs().maxCoeff() >= edge) sol.status = LPStatus::bound_active;
  }
  return sol;
}

AffinePolicy extract_policy(const LPSolution& sol, Eigen::Index n,
                            Eigen::Index m) {
  if (sol.status != LPStatus::optimal && sol.status != LPStatus::bound_active) {
    throw ExtractionError("LP solution has status " + to_string(sol.status));
  }
  if (sol.theta.size() < quad_param_count(n, m)) {
    throw ExtractionError("LP solution is shorter than a Q-function parameter");
  }
  const QuadFunction q =
      QuadFunction::from_theta(sol.theta.head(quad_param_count(n, m)), n, m);
  const Matrix quu = q.Quu();
  if (!is_positive_definite(quu, 1e-12 * std::max(1.0, quu.norm()))) {
    throw ExtractionError("recovered Quu is not positive definite");
  }
  return argmin_policy(q);
}

namespace {

// argmin_w q(x, w), or a long step along the most negative Quu direction
// when q has no minimizer in w.
class GreedyAction {
 public:
  GreedyAction(const Matrix& H, double escape_scale) {
    const double tol = 1e-12 * std::max(1.0, H.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
    convex_ = eig.eigenvalues().minCoeff() > tol;
    if (convex_) {
      llt_.compute(H);
    } else {
      escape_ = escape_scale * eig.eigenvectors().col(0);
    }
  }

  bool convex() const { return convex_; }

  // Minimizes u^T H u + 2 u^T g.
  Vector operator()(const Vector& g) const {
    if (convex_) return -llt_.solve(g);
    return escape_.dot(g) > 0.0 ? Vector(-escape_) : escape_;
  }

 private:
  bool convex_ = false;
  Eigen::LLT<Matrix> llt_;
  Vector escape_;
};

using Generator = std::function<void(const Vector& theta,
                                     std::vector<ConstraintRow>& candidates,
                                     std::size_t& skipped)>;

RefineResult run_refinement(LPProblem lp, const Generator& generate,
                            const RefineOptions& opts) {
  RefineResult out;
  std::set<std::vector<double>> seen;
  auto key_of = [](const ConstraintRow& r) {
    std::vector<double> key(r.rho.data(), r.rho.data() + r.rho.size());
    key.push_back(r.rhs);
    return key;
  };
  for (const ConstraintRow& r : lp.rows) seen.insert(key_of(r));

  for (out.rounds = 1; out.rounds <= opts.max_rounds; ++out.rounds) {
    out.solution = solve(lp, opts.solver);
    if (out.solution.status == LPStatus::infeasible ||
        out.solution.status == LPStatus::unbounded) {
      break;
    }
    std::vector<ConstraintRow> candidates;
    generate(out.solution.theta, candidates, out.skipped_targets);
    std::size_t added = 0;
    for (ConstraintRow& r : candidates) {
      const double viol = r.rho.dot(out.solution.theta) - r.rhs;
      if (viol <= opts.violation_tol * (1.0 + std::abs(r.rhs))) continue;
      if (!seen.insert(key_of(r)).second) continue;
      lp.rows.push_back(std::move(r));
      ++added;
    }
    out.rows_added += added;
    if (added == 0) {
      out.converged = out.solution.status == LPStatus::optimal;
      break;
    }
  }
  out.rounds = std::min(out.rounds, opts.max_rounds);
  lp.mixed_covariance = spread_exceeds(lp.rows, 0.05);
  out.lp = std::move(lp);
  return out;
}

double rollout_cap(const std::vector<StateInput>& samples) {
  double r = 0.0;
  for (const StateInput& s : samples) r = std::max(r, s.x.norm());
  return 1e3 * (1.0 + r);
}

// Anchors (x,u): the given pairs followed by closed-loop rollouts of the
// samples under `policy`, advanced by `successor`.
template <class Policy, class Successor>
std::vector<StateInput> rollout_anchors(
    const std::vector<StateInput>& samples, std::size_t steps,
    const Policy& policy, const Successor& successor) {
  std::vector<StateInput> anchors;
  const double cap = rollout_cap(samples);
  for (const StateInput& s : samples) {
    Vector x = s.x;
    Vector u = s.u;
    for (std::size_t k = 0; k < steps; ++k) {
      anchors.push_back({x, u});
      x = successor(x, u);
      if (!x.allFinite() || x.norm() > cap) break;
      u = policy(x);
    }
  }
  return anchors;
}

}  // namespace

RefineResult refine_qlp(const RowSource& source,
                        const std::vector<Target>& base_targets,
                        const std::vector<StateInput>& objective_samples,
                        std::optional<double> bound,
                        const RefineOptions& opts) {
  const Eigen::Index n = source.n();
  const Eigen::Index m = source.m();
  std::vector<ConstraintRow> rows;
  std::size_t skipped = 0;
  for (const Target& t : base_targets) {
    try {
      rows.push_back(source.row(t.x, t.u, t.w));
    } catch (const SynthesisError&) {
      ++skipped;
    }
  }
  LPProblem lp =
      build_relaxed_qlp(std::move(rows), build_objective(objective_samples),
                        bound);

  std::vector<StateInput> base;
  for (const Target& t : base_targets) base.push_back({t.x, t.u});

  const Generator gen = [&](const Vector& theta,
                            std::vector<ConstraintRow>& out,
                            std::size_t& skip) {
    const QuadFunction q = QuadFunction::from_theta(theta, n, m);
    const GreedyAction act(q.Quu(), opts.escape_scale);
    const Matrix qxu = q.Qxu();
    const Vector qu = q.qu();
    auto policy = [&](const Vector& x) -> Vector {
      return act(qxu.transpose() * x + qu);
    };
    auto succ = [&](const Vector& x, const Vector& u) {
      return source.successor(x, u);
    };
    std::vector<StateInput> anchors = base;
    const std::vector<StateInput> rolled =
        rollout_anchors(objective_samples, opts.rollout_steps, policy, succ);
    anchors.insert(anchors.end(), rolled.begin(), rolled.end());
    for (const StateInput& a : anchors) {
      Vector w = policy(source.successor(a.x, a.u));
      // Escape steps shrink until the source can synthesize them.
      for (int attempt = 0;; ++attempt) {
        try {
          out.push_back(source.row(a.x, a.u, w));
          break;
        } catch (const SynthesisError&) {
          if (act.convex() || attempt >= 40) {
            ++skip;
            break;
          }
          w *= 0.5;
        }
      }
    }
  };
  RefineResult res = run_refinement(std::move(lp), gen, opts);
  res.skipped_targets += skipped;
  return res;
}

RefineResult refine_value_lp(const AffineSystem& sys, const StageCost& cost,
                             const std::vector<StateInput>& grid,
                             const std::vector<Vector>& objective_states,
                             std::optional<double> bound,
                             const RefineOptions& opts) {
  LPProblem lp = build_value_lp(sys, cost, grid,
                                build_value_objective(objective_states), bound);
  std::vector<StateInput> samples;
  for (const Vector& x : objective_states) {
    samples.push_back({x, Vector::Zero(sys.m())});
  }
  const Eigen::Index n = sys.n();
  const Generator gen = [&](const Vector& theta,
                            std::vector<ConstraintRow>& out, std::size_t&) {
    const ValueQuad v = ValueQuad::from_theta(theta, n);
    const Matrix P = v.P.matrix();
    const Matrix H = cost.Luu + sys.gamma * sys.B.transpose() * P * sys.B;
    const GreedyAction act(H, opts.escape_scale);
    auto policy = [&](const Vector& x) -> Vector {
      const Vector g = cost.Lxu.transpose() * x + cost.Lu +
                       sys.gamma * sys.B.transpose() *
                           (P * (sys.A * x + sys.c + sys.mu) + v.Pl);
      return act(g);
    };
    auto succ = [&](const Vector& x, const Vector& u) {
      return sys.mean_successor(x, u);
    };
    std::vector<StateInput> anchors = grid;
    std::vector<StateInput> rolled = samples;
    for (StateInput& s : rolled) s.u = policy(s.x);
    rolled = rollout_anchors(rolled, opts.rollout_steps, policy, succ);
    anchors.insert(anchors.end(), rolled.begin(), rolled.end());
    for (const StateInput& a : anchors) {
      out.push_back(value_row(sys, cost, a.x, policy(a.x)));
    }
  };
  return run_refinement(std::move(lp), gen, opts);
}

RefineResult refine_vq_lp(const AffineSystem& sys, const StageCost& cost,
                          const std::vector<StateInput>& grid,
                          const std::vector<StateInput>& objective_samples,
                          std::optional<double> bound,
                          const RefineOptions& opts) {
  std::vector<StateInput> initial = grid;
  initial.insert(initial.end(), objective_samples.begin(),
                 objective_samples.end());
  LPProblem lp = build_vq_lp(sys, cost, initial,
                             build_objective(objective_samples), bound);
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const Eigen::Index p = quad_param_count(n, m);
  const Generator gen = [&](const Vector& theta,
                            std::vector<ConstraintRow>& out, std::size_t&) {
    const QuadFunction q = QuadFunction::from_theta(theta.head(p), n, m);
    const GreedyAction act(q.Quu(), opts.escape_scale);
    const Matrix qxu = q.Qxu();
    const Vector qu = q.qu();
    auto policy = [&](const Vector& x) -> Vector {
      return act(qxu.transpose() * x + qu);
    };
    auto succ = [&](const Vector& x, const Vector& u) {
      return sys.mean_successor(x, u);
    };
    std::vector<StateInput> anchors = grid;
    const std::vector<StateInput> rolled =
        rollout_anchors(objective_samples, opts.rollout_steps, policy, succ);
    anchors.insert(anchors.end(), rolled.begin(), rolled.end());
    for (const StateInput& a : anchors) {
      out.push_back(vq_bellman_row(sys, cost, a.x, a.u));
      out.push_back(vq_link_row(a.x, policy(a.x)));
      const Vector next = succ(a.x, a.u);
      out.push_back(vq_link_row(next, policy(next)));
    }
  };
  return run_refinement(std::move(lp), gen, opts);
}

std::vector<StateInput> gaussian_state_inputs(Eigen::Index n, Eigen::Index m,
                                              std::size_t count, double scale,
                                              Rng& rng) {
  std::vector<StateInput> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector x = gaussian_vector(n, rng, scale);
    Vector u = gaussian_vector(m, rng, scale);
    out.push_back({std::move(x), std::move(u)});
  }
  return out;
}

std::vector<Target> gaussian_targets(Eigen::Index n, Eigen::Index m,
                                     std::size_t count, double scale,
                                     Rng& rng) {
  std::vector<Target> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector x = gaussian_vector(n, rng, scale);
    Vector u = gaussian_vector(m, rng, scale);
    Vector w = gaussian_vector(m, rng, scale);
    out.push_back({std::move(x), std::move(u), std::move(w)});
  }
  return out;
}

}  // namespace affinelp
