#pragma once

// Finite LPs over generalized-quadratic parametrizations, a dense simplex
// solver, policy extraction, and greedy constraint generation.

#include <optional>
#include <string>
#include <vector>

#include "affinelp/fixedpoint.hpp"
#include "affinelp/synthesis.hpp"

namespace affinelp {

inline constexpr double kDefaultBound = 1e6;

// maximize objective^T theta  s.t.  rho^T theta <= rhs for every row, and
// |theta_i| <= bound when a bound is set.
struct LPProblem {
  Vector objective;
  std::vector<ConstraintRow> rows;
  std::optional<double> bound = kDefaultBound;
  Eigen::Index decision_dim = 0;
  // Rows carry |alpha|^2 values spread by more than 5%.
  bool mixed_covariance = false;

  // Shapes and finiteness; throws DimensionError.
  void validate() const;
};

enum class LPStatus { optimal, unbounded, infeasible, bound_active };

std::string to_string(LPStatus s);
LPStatus lp_status_from_string(const std::string& s);

struct LPSolution {
  Vector theta;
  LPStatus status = LPStatus::infeasible;
  double objective_value = 0.0;
  std::size_t iterations = 0;
};

struct SolverOptions {
  double tol = 1e-9;
  std::size_t max_pivots = 100000;
  // Consecutive degenerate pivots before switching to Bland's rule.
  std::size_t degenerate_limit = 50;
};

struct StateInput {
  Vector x;
  Vector u;
};

// Mean of quad_features([x;u]) over the samples, optionally weighted
// (weights are normalized to sum to one). Throws PreconditionError when empty.
Vector build_objective(const std::vector<StateInput>& samples,
                       const std::vector<double>& weights = {});
// Same for value functions: mean of [hv_weighted(x x^T); 2x; 1].
Vector build_value_objective(const std::vector<Vector>& states);

LPProblem build_relaxed_qlp(std::vector<ConstraintRow> rows, Vector objective,
                            std::optional<double> bound = kDefaultBound);

// v(x) - gamma E[v(x+)] <= l(x,u) per grid point, v = [hv P; Pl; Pc].
ConstraintRow value_row(const AffineSystem& sys, const StageCost& cost,
                        const Vector& x, const Vector& u);
// Objective defaults to the grid states.
LPProblem build_value_lp(const AffineSystem& sys, const StageCost& cost,
                         const std::vector<StateInput>& grid,
                         std::optional<Vector> objective = {},
                         std::optional<double> bound = kDefaultBound);

// Joint variable [theta(q); theta(v)].
// q(x,u) - gamma E[v(x+)] <= l(x,u).
ConstraintRow vq_bellman_row(const AffineSystem& sys, const StageCost& cost,
                             const Vector& x, const Vector& u);
// v(x) - q(x,u) <= 0.
ConstraintRow vq_link_row(const Vector& x, const Vector& u);
// Objective on the q block only; defaults to the grid. Throws
// PreconditionError for an empty grid.
LPProblem build_vq_lp(const AffineSystem& sys, const StageCost& cost,
                      const std::vector<StateInput>& grid,
                      std::optional<Vector> objective = {},
                      std::optional<double> bound = kDefaultBound);

// Revised simplex on the dual. Throws NumericalError on the pivot limit.
LPSolution solve(const LPProblem& lp, const SolverOptions& opts = {});

// argmin_u of the recovered q. Throws ExtractionError when the solution has
// no theta or Quu is not positive definite.
AffinePolicy extract_policy(const LPSolution& sol, Eigen::Index n,
                            Eigen::Index m);

// Greedy constraint generation. Each round solves the current LP, rolls the
// objective samples forward under the iterate's greedy policy, and adds rows
// at the greedy w (or greedy u for the value LP) that the iterate violates.
struct RefineOptions {
  std::size_t max_rounds = 60;
  std::size_t rollout_steps = 10;
  double violation_tol = 1e-9;
  // Step used along the most negative Quu direction when the iterate has no
  // minimizer.
  double escape_scale = 1e3;
  SolverOptions solver;
};

struct RefineResult {
  LPProblem lp;
  LPSolution solution;
  std::size_t rounds = 0;
  std::size_t rows_added = 0;
  std::size_t skipped_targets = 0;  // synthesis failures
  bool converged = false;
};

RefineResult refine_qlp(const RowSource& source,
                        const std::vector<Target>& base_targets,
                        const std::vector<StateInput>& objective_samples,
                        std::optional<double> bound = kDefaultBound,
                        const RefineOptions& opts = {});

RefineResult refine_value_lp(const AffineSystem& sys, const StageCost& cost,
                             const std::vector<StateInput>& grid,
                             const std::vector<Vector>& objective_states,
                             std::optional<double> bound = kDefaultBound,
                             const RefineOptions& opts = {});

RefineResult refine_vq_lp(const AffineSystem& sys, const StageCost& cost,
                          const std::vector<StateInput>& grid,
                          const std::vector<StateInput>& objective_samples,
                          std::optional<double> bound = kDefaultBound,
                          const RefineOptions& opts = {});

// Default sample sets: Gaussian clouds with the given scale.
std::vector<StateInput> gaussian_state_inputs(Eigen::Index n, Eigen::Index m,
                                              std::size_t count, double scale,
                                              Rng& rng);
std::vector<Target> gaussian_targets(Eigen::Index n, Eigen::Index m,
                                     std::size_t count, double scale, Rng& rng);

}  // namespace affinelp
