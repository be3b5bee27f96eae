#include "affinelp/excitation.hpp"

#include <sstream>

namespace affinelp {

namespace {

Matrix append_ones_row(const Matrix& m) {
  Matrix out(m.rows() + 1, m.cols());
  out.topRows(m.rows()) = m;
  out.bottomRows(1).setOnes();
  return out;
}

std::size_t rank_of(const Matrix& m, double rel_tol, Vector* sv = nullptr) {
  const Vector s = singular_values(m);
  if (sv) *sv = s;
  if (s.size() == 0 || s(0) == 0.0) return 0;
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++r;
  }
  return r;
}

void require_deterministic_trajectory(const Dataset& ds, const char* what) {
  ds.validate();
  if (!ds.single_trajectory) {
    throw PreconditionError(std::string(what) +
                            ": dataset is not a single trajectory");
  }
  if (!ds.is_deterministic()) {
    throw PreconditionError(std::string(what) +
                            ": dataset carries nonzero noise");
  }
}

}  // namespace

PEReport is_persistently_exciting(const Matrix& seq, Eigen::Index order,
                                  double rel_tol) {
  const Matrix h = hankel(seq, order);
  PEReport r;
  r.order_tested = order;
  r.required_rank = static_cast<std::size_t>(seq.rows() * order);
  r.hankel_rank = rank_of(h, rel_tol, &r.singular_values);
  r.is_pe = r.hankel_rank == r.required_rank;
  r.ones_in_rowspace =
      rank_of(append_ones_row(h), rel_tol) == r.hankel_rank;
  r.length_warning = seq.cols() < (seq.rows() + 1) * order - 1;
  return r;
}

bool pe_monotonicity_check(const Matrix& seq, Eigen::Index order,
                           double rel_tol) {
  if (!is_persistently_exciting(seq, order, rel_tol).is_pe) {
    std::ostringstream os;
    os << "pe_monotonicity_check: sequence is not persistently exciting of "
          "order "
       << order;
    throw PreconditionError(os.str());
  }
  for (Eigen::Index k = 1; k < order; ++k) {
    const PEReport r = is_persistently_exciting(seq, k, rel_tol);
    if (!r.is_pe || r.ones_in_rowspace) return false;
  }
  return true;
}

Matrix stacked_data_matrix(const Dataset& ds, const Matrix& W) {
  if (W.cols() != ds.length()) {
    throw DimensionError("W width differs from dataset length");
  }
  if (W.rows() != ds.m()) {
    throw DimensionError("W must have as many rows as U");
  }
  return vstack({ds.X, ds.U, Matrix::Ones(1, ds.length()), W});
}

RankReport rank_condition_report(const Dataset& ds, const Matrix& W,
                                 double rel_tol) {
  ds.validate();
  RankReport r;
  r.required = static_cast<std::size_t>(ds.n() + 2 * ds.m() + 1);
  r.rank = rank_of(stacked_data_matrix(ds, W), rel_tol, &r.singular_values);
  r.full = r.rank == r.required;
  return r;
}

bool check_rank_condition(const Dataset& ds, const Matrix& W,
                          double rel_tol) {
  return rank_condition_report(ds, W, rel_tol).full;
}

Matrix fundamental_lemma_matrix(const Dataset& ds, Eigen::Index horizon) {
  const Eigen::Index d = ds.length();
  if (horizon < 1 || horizon > d) {
    throw DepthError("fundamental lemma: horizon exceeds dataset length");
  }
  const Eigen::Index cols = d - horizon + 1;
  return vstack({ds.X.leftCols(cols), hankel(ds.U, horizon),
                 Matrix::Ones(1, cols)});
}

RankReport fundamental_lemma_report(const Dataset& ds, Eigen::Index horizon,
                                    double rel_tol) {
  require_deterministic_trajectory(ds, "fundamental_lemma_rank");
  RankReport r;
  r.required = static_cast<std::size_t>(ds.n() + ds.m() * horizon + 1);
  r.rank = rank_of(fundamental_lemma_matrix(ds, horizon), rel_tol,
                   &r.singular_values);
  r.full = r.rank == r.required;
  return r;
}

bool fundamental_lemma_rank(const Dataset& ds, Eigen::Index horizon,
                            double rel_tol) {
  return fundamental_lemma_report(ds, horizon, rel_tol).full;
}

Representation represent_trajectory(const Dataset& ds, Eigen::Index horizon,
                                    const Matrix& target_u,
                                    const Matrix& target_y, double rel_tol) {
  require_deterministic_trajectory(ds, "represent_trajectory");
  const Matrix& Y = ds.Y ? *ds.Y : ds.X;
  if (target_u.rows() != ds.m() || target_u.cols() != horizon ||
      target_y.rows() != Y.rows() || target_y.cols() != horizon) {
    throw DimensionError("represent_trajectory: target shape mismatch");
  }
  const Eigen::Index cols = ds.length() - horizon + 1;
  const Matrix H = vstack({hankel(ds.U, horizon), hankel(Y, horizon),
                           Matrix::Ones(1, cols)});
  Vector target(H.rows());
  const Eigen::Index nu = target_u.size();
  target.head(nu) = target_u.reshaped();
  target.segment(nu, target_y.size()) = target_y.reshaped();
  target(target.size() - 1) = 1.0;

  Representation rep;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(kDefaultRankTol);
  cod.compute(H);
  rep.g = cod.solve(target);
  rep.residual = (H * rep.g - target).norm();
  rep.relative_residual = rep.residual / std::max(1.0, target.norm());
  rep.feasible = rep.relative_residual <= rel_tol;
  return rep;
}

std::vector<Eigen::Index> affine_subspace_probe(const Dataset& ds,
                                                double tol) {
  ds.validate();
  if (!ds.single_trajectory) {
    throw PreconditionError("affine_subspace_probe: needs a single trajectory");
  }
  const Eigen::Index d = ds.length();
  Matrix traj(ds.n(), d + 1);
  traj.leftCols(d) = ds.X;
  traj.col(d) = ds.Xplus.col(d - 1);
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    const double lo = traj.row(i).minCoeff();
    const double hi = traj.row(i).maxCoeff();
    const double scale = std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    if (hi - lo <= tol * scale) out.push_back(i);
  }
  return out;
}

}  // namespace affinelp
