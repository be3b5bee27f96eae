#pragma once

// Persistency of excitation and the fundamental lemma for affine systems.

#include <string>
#include <vector>

#include "affinelp/model.hpp"

namespace affinelp {

struct PEReport {
  Eigen::Index order_tested = 0;
  std::size_t hankel_rank = 0;
  std::size_t required_rank = 0;
  bool is_pe = false;
  // 1^T lies in the row space of the depth-K Hankel matrix.
  bool ones_in_rowspace = false;
  // d < (m+1)K - 1: PE of order K is impossible with this many samples.
  bool length_warning = false;
  Vector singular_values;
};

PEReport is_persistently_exciting(const Matrix& seq, Eigen::Index order,
                                  double rel_tol = kDefaultRankTol);

// For every K' < K: PE of order K' holds and 1^T is outside the row space of
// H_{K'}. Throws PreconditionError when seq is not PE of order K.
bool pe_monotonicity_check(const Matrix& seq, Eigen::Index order,
                           double rel_tol = kDefaultRankTol);

// [X; U; 1^T; W].
Matrix stacked_data_matrix(const Dataset& ds, const Matrix& W);

// rank [X; U; 1^T; W] == n + 2m + 1.
bool check_rank_condition(const Dataset& ds, const Matrix& W,
                          double rel_tol = kDefaultRankTol);

struct RankReport {
  std::size_t rank = 0;
  std::size_t required = 0;
  bool full = false;
  Vector singular_values;
};

RankReport rank_condition_report(const Dataset& ds, const Matrix& W,
                                 double rel_tol = kDefaultRankTol);

// [H_1(X_{1:d-L+1}); H_L(U); 1^T].
Matrix fundamental_lemma_matrix(const Dataset& ds, Eigen::Index horizon);

// Rank report for the matrix above against n + mL + 1. Throws
// PreconditionError for multi-trajectory or noisy data.
RankReport fundamental_lemma_report(const Dataset& ds, Eigen::Index horizon,
                                    double rel_tol = kDefaultRankTol);
bool fundamental_lemma_rank(const Dataset& ds, Eigen::Index horizon,
                            double rel_tol = kDefaultRankTol);

struct Representation {
  bool feasible = false;
  Vector g;
  double residual = 0.0;           // |H g - target|_2
  double relative_residual = 0.0;  // residual / max(1, |target|)
};

inline constexpr double kRepresentTol = 1e-6;

// Solves [H_L(U); H_L(Y); 1^T] g = [vec U~; vec Y~; 1] in the least-norm
// sense. Y defaults to X (full-state output) when the dataset carries none.
Representation represent_trajectory(const Dataset& ds, Eigen::Index horizon,
                                    const Matrix& target_u,
                                    const Matrix& target_y,
                                    double rel_tol = kRepresentTol);

// Indices i for which e_i^T x is constant (within tol) along the state
// trajectory X plus the final successor.
std::vector<Eigen::Index> affine_subspace_probe(const Dataset& ds,
                                                double tol = 1e-9);

}  // namespace affinelp
