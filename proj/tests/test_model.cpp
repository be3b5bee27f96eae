#include <gtest/gtest.h>

#include <algorithm>
#include <complex>

#include "affinelp/model.hpp"
#include "oracles.hpp"

using namespace affinelp;

namespace {

AffineSystem scalar_system(double a, double b, double c, double gamma = 0.9) {
  AffineSystem sys;
  sys.A = Matrix::Constant(1, 1, a);
  sys.B = Matrix::Constant(1, 1, b);
  sys.c = Vector::Constant(1, c);
  sys.mu = Vector::Zero(1);
  sys.Sigma = SymMatrix(1);
  sys.gamma = gamma;
  return sys;
}

}  // namespace

TEST(AffineSystem, ValidateRejectsBadGammaAndSigma) {
  AffineSystem sys = scalar_system(0.5, 1, 0);
  EXPECT_NO_THROW(sys.validate());
  sys.gamma = 1.0;
  EXPECT_THROW(sys.validate(), PreconditionError);
  sys.gamma = 0.9;
  sys.Sigma = SymMatrix::identity(1) * -1.0;
  EXPECT_THROW(sys.validate(), PreconditionError);
  sys.Sigma = SymMatrix::identity(2);
  EXPECT_THROW(sys.validate(), DimensionError);
}

TEST(StageCost, ValidateRequiresPositiveDefiniteLuu) {
  StageCost cost = StageCost::quadratic(2, 1);
  EXPECT_NO_THROW(cost.validate());
  cost.Luu(0, 0) = 0.0;
  EXPECT_THROW(cost.validate(), PreconditionError);
}

TEST(Augment, ScalarBlocks) {
  AffineSystem sys = scalar_system(0.5, 1, 1);
  sys.Sigma = SymMatrix::identity(1) * 2.0;
  const AugmentedSystem aug = augment(sys, StageCost::quadratic(1, 1));
  Matrix atil(2, 2);
  atil << 0.5, 1, 0, 1;
  EXPECT_EQ(aug.Atil, atil);
  Matrix stil(2, 2);
  stil << 2, 0, 0, 0;
  EXPECT_EQ(aug.SigmaTil.matrix(), stil);
  EXPECT_EQ(aug.Btil(1, 0), 0.0);
}

TEST(Augment, NoiseMeanMovesIntoOffsetColumn) {
  AffineSystem sys = scalar_system(0.5, 1, 1);
  sys.mu = Vector::Constant(1, 0.25);
  const AugmentedSystem aug = augment(sys, StageCost::quadratic(1, 1));
  EXPECT_DOUBLE_EQ(aug.Atil(0, 1), 1.25);
}

TEST(Augment, SpectrumIsSpectrumOfAPlusOne) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + trial % 4;
    const AffineSystem sys = oracle::random_system(n, 1, rng);
    const AugmentedSystem aug = augment(sys, oracle::random_cost(n, 1, rng));
    std::vector<std::complex<double>> expected;
    const Eigen::VectorXcd ev = sys.A.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) expected.push_back(ev(i));
    expected.emplace_back(1.0, 0.0);
    const Eigen::VectorXcd got = aug.Atil.eigenvalues();
    ASSERT_EQ(static_cast<std::size_t>(got.size()), expected.size());
    for (Eigen::Index i = 0; i < got.size(); ++i) {
      const auto nearest = std::min_element(
          expected.begin(), expected.end(), [&](auto a, auto b) {
            return std::abs(a - got(i)) < std::abs(b - got(i));
          });
      EXPECT_LE(std::abs(*nearest - got(i)), 1e-8);
      expected.erase(nearest);
    }
  }
}

TEST(Augment, AugmentedCostMatchesStageCost) {
  Rng rng(23);
  const Eigen::Index n = 3;
  const Eigen::Index m = 2;
  const AffineSystem sys = oracle::random_system(n, m, rng);
  const StageCost cost = oracle::random_cost(n, m, rng);
  const AugmentedSystem aug = augment(sys, cost);
  for (int i = 0; i < 100; ++i) {
    const Vector x = gaussian_vector(n, rng);
    const Vector u = gaussian_vector(m, rng);
    Vector xt(n + 1);
    xt << x, 1.0;
    const double direct = stage_cost_eval(cost, x, u);
    EXPECT_NEAR(augmented_cost_eval(aug, xt, u), direct,
                1e-12 * (1.0 + std::abs(direct)));
  }
}

TEST(StageCostEval, Examples) {
  StageCost cost = StageCost::quadratic(1, 1, 1.0, 1.0);
  cost.Lc = 4.0;
  EXPECT_DOUBLE_EQ(stage_cost_eval(cost, Vector::Zero(1), Vector::Zero(1)), 4.0);
  cost.Lc = 0.0;
  cost.Luu.setZero();
  EXPECT_DOUBLE_EQ(
      stage_cost_eval(cost, Vector::Constant(1, 3.0), Vector::Zero(1)), 9.0);
}

TEST(StageCostEval, MatchesWeightedHalfVectorization) {
  Rng rng(6);
  const StageCost cost = oracle::random_cost(2, 2, rng);
  for (int i = 0; i < 50; ++i) {
    const Vector x = gaussian_vector(2, rng);
    const Vector u = gaussian_vector(2, rng);
    Vector z(4);
    z << x, u;
    const double via_hv = hv_weighted(SymMatrix::outer(z)).dot(hv(cost.L())) +
                          2.0 * z.dot(cost.L_linear()) + cost.Lc;
    EXPECT_NEAR(stage_cost_eval(cost, x, u), via_hv, 1e-12 * (1.0 + std::abs(via_hv)));
  }
}

TEST(Step, IdentityDynamicsWithoutNoise) {
  AffineSystem sys = scalar_system(1, 0, 0);
  Rng rng(1);
  const StepResult r = step(sys, Vector::Constant(1, 2.5), Vector::Constant(1, 7.0), rng);
  EXPECT_EQ(r.xplus(0), 2.5);
  EXPECT_EQ(r.xi(0), 0.0);
}

TEST(Step, DeterministicLimitIsExact) {
  Rng rng(2);
  AffineSystem sys = oracle::random_system(3, 2, rng);
  sys.Sigma = SymMatrix(3);
  sys.mu.setZero();
  const Vector x = gaussian_vector(3, rng);
  const Vector u = gaussian_vector(2, rng);
  EXPECT_EQ(step(sys, x, u, rng).xplus, sys.A * x + sys.B * u + sys.c);
}

TEST(NoiseSampler, SampleMeanWithinFourSigma) {
  Rng rng(31);
  AffineSystem sys = oracle::random_system(2, 1, rng, 0.5);
  const NoiseSampler sampler(sys);
  const Eigen::Index N = 100000;
  const Matrix draws = sampler.draw_many(rng, N);
  const Vector mean = draws.rowwise().mean();
  for (Eigen::Index i = 0; i < 2; ++i) {
    const double sd = std::sqrt(sys.Sigma(i, i));
    EXPECT_LE(std::abs(mean(i) - sys.mu(i)), 4.0 * sd / std::sqrt(double(N)));
  }
  const Matrix centred = draws.colwise() - mean;
  const Matrix cov = centred * centred.transpose() / double(N - 1);
  EXPECT_LE((cov - sys.Sigma.matrix()).norm(), 0.05 * sys.Sigma.matrix().norm());
}

TEST(NoiseSampler, SingularCovariance) {
  Matrix s(2, 2);
  s << 1, 1, 1, 1;
  const NoiseSampler sampler(Vector::Zero(2), SymMatrix::from_upper(s));
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const Vector xi = sampler.draw(rng);
    EXPECT_NEAR(xi(0), xi(1), 1e-12);
  }
}

TEST(Simulate, SingleStep) {
  const AffineSystem sys = scalar_system(1, 1, 1);
  Rng rng(0);
  const Dataset ds = simulate(sys, Vector::Zero(1), Matrix::Zero(1, 1), rng);
  EXPECT_EQ(ds.length(), 1);
  EXPECT_EQ(ds.Xplus(0, 0), 1.0);
}

TEST(Simulate, HandIteratedScalar) {
  const AffineSystem sys = scalar_system(1, 1, 1);
  Rng rng(0);
  const Dataset ds = simulate(sys, Vector::Zero(1), Matrix::Zero(1, 3), rng);
  Matrix X(1, 3);
  X << 0, 1, 2;
  Matrix Xp(1, 3);
  Xp << 1, 2, 3;
  EXPECT_EQ(ds.X, X);
  EXPECT_EQ(ds.Xplus, Xp);
  EXPECT_TRUE(ds.single_trajectory);
  EXPECT_TRUE(ds.is_deterministic());
}

TEST(Simulate, ChainingAndReplay) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const AffineSystem sys = oracle::random_system(3, 2, rng);
    const Dataset ds = simulate(sys, gaussian_vector(3, rng),
                                gaussian_matrix(2, 30, rng), rng);
    EXPECT_NO_THROW(ds.validate());
    for (Eigen::Index i = 0; i + 1 < ds.length(); ++i) {
      EXPECT_EQ(ds.X.col(i + 1), ds.Xplus.col(i));
    }
    ASSERT_TRUE(ds.Omega.has_value());
    EXPECT_LE(ds.replay_error(sys), 1e-12);
    EXPECT_FALSE(ds.is_deterministic());
  }
}

TEST(Simulate, DeterministicReplayIsBitExact) {
  Rng rng(13);
  AffineSystem sys = oracle::random_system(2, 1, rng);
  sys.Sigma = SymMatrix(2);
  sys.mu.setZero();
  const Dataset ds =
      simulate(sys, gaussian_vector(2, rng), gaussian_matrix(1, 20, rng), rng);
  EXPECT_EQ(ds.replay_error(sys), 0.0);
}

TEST(Simulate, SeededRunsAreReproducible) {
  Rng a(99);
  Rng b(99);
  Rng sys_rng(5);
  const AffineSystem sys = oracle::random_system(2, 2, sys_rng);
  const Matrix u = gaussian_matrix(2, 15, sys_rng);
  const Dataset da = simulate(sys, Vector::Ones(2), u, a);
  const Dataset db = simulate(sys, Vector::Ones(2), u, b);
  EXPECT_EQ(da.X, db.X);
  EXPECT_EQ(da.Xplus, db.Xplus);
}

TEST(Dataset, ValidateCatchesBrokenChain) {
  Rng rng(3);
  const AffineSystem sys = scalar_system(0.5, 1, 0);
  Dataset ds = simulate(sys, Vector::Zero(1), gaussian_matrix(1, 5, rng), rng);
  ds.X(0, 2) += 1.0;
  EXPECT_THROW(ds.validate(), DimensionError);
  ds.single_trajectory = false;
  EXPECT_NO_THROW(ds.validate());
}
