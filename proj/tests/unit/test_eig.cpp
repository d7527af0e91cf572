#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Eigenvalues>

#include "eigen_bridge.hpp"
#include "mplab/eig.hpp"
#include "mplab/error.hpp"
#include "mplab/generate.hpp"

using namespace mplab;

namespace {

DenseMatrix with_spectrum(const Vector& lambda, Rng& rng) {
  const std::size_t n = lambda.size();
  const Eigen::MatrixXd q = oracle::to_eigen(random_orthonormal(n, n, rng));
  Eigen::MatrixXd a = q * oracle::to_eigen(lambda).asDiagonal() * q.transpose();
  a = (0.5 * (a + a.transpose())).eval();
  return oracle::from_eigen(a);
}

double max_of(const Vector& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

TEST(Jacobi, DiagonalInput) {
  const DenseMatrix a = DenseMatrix::diagonal(std::vector<double>{3, 1, 2});
  const auto p = jacobi_eig(a, fp64, 1e-15);
  EXPECT_EQ(p.lambda, (Vector{1, 2, 3}));
  // Columns are a permutation of the identity.
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += std::fabs(p.x(i, j));
    EXPECT_EQ(s, 1.0);
  }
  EXPECT_EQ(p.x(1, 0), 1.0);
  EXPECT_EQ(p.x(2, 1), 1.0);
  EXPECT_EQ(p.x(0, 2), 1.0);
}

TEST(Jacobi, Binary64MatchesEigen) {
  Rng rng(1);
  const DenseMatrix a = random_symmetric(50, rng);
  const auto p = jacobi_eig(a, fp64, 1e-15);
  EXPECT_LE(max_of(eigen_residuals(a, p)), 1e-13);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::to_eigen(a));
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(p.lambda[i], es.eigenvalues()(i), 1e-13 * scale);
}

TEST(Jacobi, SinglePrecisionPlateau) {
  Rng rng(2);
  const DenseMatrix a = random_symmetric(40, rng);
  const auto p = jacobi_eig(a, fp32, fp32.unit_roundoff());
  const double r = max_of(eigen_residuals(a, p));
  EXPECT_LE(r, 1e-4);
  EXPECT_GE(r, 1e-10);  // well above binary64 level
}

TEST(Norm2, MatchesEigen) {
  Rng rng(3);
  const DenseMatrix a = random_symmetric(30, rng);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::to_eigen(a));
  EXPECT_NEAR(norm2_symmetric(a, 1000), es.eigenvalues().cwiseAbs().maxCoeff(),
              1e-6 * es.eigenvalues().cwiseAbs().maxCoeff());
}

TEST(RefSyEv, ExactPairsAreFixedPoint) {
  const DenseMatrix a = DenseMatrix::diagonal(std::vector<double>{1, 4, 9});
  EigenPairs p;
  p.x = DenseMatrix::identity(3);
  p.lambda = {1, 4, 9};
  const auto r = refine_syev(a, p);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(r.step.e(i, j), 0.0);
      EXPECT_EQ(r.pairs.x(i, j), p.x(i, j));
    }
  EXPECT_EQ(r.pairs.lambda, p.lambda);
}

TEST(RefSyEv, Binary64PairsBarelyMove) {
  Rng rng(4);
  const DenseMatrix a = random_symmetric(40, rng);
  const auto p = jacobi_eig(a, fp64, 1e-15);
  const auto r = refine_syev(a, p);
  const double an = norm2_symmetric(a);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j)
      EXPECT_LE(std::fabs(r.pairs.x(i, j) - p.x(i, j)), 10 * 40 * fp64.unit_roundoff() * an);
}

TEST(RefSyEv, RayleighQuotientsOnExactSubspace) {
  Rng rng(5);
  const DenseMatrix a = random_symmetric(20, rng);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::to_eigen(a));
  EigenPairs p;
  p.x = oracle::from_eigen(es.eigenvectors());
  p.lambda = oracle::from_eigen_vec(es.eigenvalues());
  const auto r = refine_syev(a, p);
  const Eigen::MatrixXd s =
      es.eigenvectors().transpose() * oracle::to_eigen(a) * es.eigenvectors();
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(r.pairs.lambda[i], s(i, i), 1e-13);
}

TEST(RefSyEv, SinglePrecisionToDouble) {
  Rng rng(6);
  const DenseMatrix a = random_symmetric(80, rng);
  EigenPairs p = jacobi_eig(a, fp32, fp32.unit_roundoff());
  std::vector<Vector> hist{eigen_residuals(a, p)};
  for (int it = 0; it < 4 && max_of(hist.back()) > 1e-13; ++it) {
    auto r = refine_syev(a, p);
    p = std::move(r.pairs);
    hist.push_back(r.step.residuals);
  }
  EXPECT_LE(max_of(hist.back()), 1e-13);
  const double floor = 80 * fp64.unit_roundoff();
  for (std::size_t k = 1; k < hist.size(); ++k)
    for (std::size_t i = 0; i < 80; ++i)
      if (hist[k - 1][i] > floor) EXPECT_LE(hist[k][i], hist[k - 1][i]) << k << " " << i;
}

TEST(RefSyEv, TightClusterTakesHalfBranch) {
  Rng rng(7);
  Vector lambda{1.0, 1.0 + 1e-10, 2.0, 3.0, 4.0, 5.0};
  const DenseMatrix a = with_spectrum(lambda, rng);
  EigenPairs p = jacobi_eig(a, fp32, fp32.unit_roundoff());
  double prev = max_of(eigen_residuals(a, p));
  for (int it = 0; it < 4; ++it) {
    auto r = refine_syev(a, p);
    // The clustered pair falls below omega: e = r / 2 there.
    const double omega = r.step.omega;
    EXPECT_GT(omega, 1e-10);
    const DenseMatrix& x = p.x;
    const Eigen::MatrixXd rr = Eigen::MatrixXd::Identity(6, 6) -
                               oracle::to_eigen(x).transpose() * oracle::to_eigen(x);
    EXPECT_NEAR(r.step.e(0, 1), rr(0, 1) / 2, 1e-15);
    p = std::move(r.pairs);
    const double cur = max_of(r.step.residuals);
    EXPECT_TRUE(std::isfinite(cur));
    EXPECT_LE(cur, std::max(prev * (1 + 1e-6), 1e-14));
    prev = cur;
  }
  // Vectors inside the cluster are not separated; the residual floors at
  // roughly the cluster width.
  EXPECT_LE(prev, 1e-10);
}

TEST(RefSyEv, PartialSpectrumFlagged) {
  Rng rng(8);
  const DenseMatrix a = random_symmetric(10, rng);
  const auto full = jacobi_eig(a, fp64, 1e-15);
  EigenPairs p;
  p.x = DenseMatrix(10, 3);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 3; ++j) p.x(i, j) = full.x(i, j);
  p.lambda = {full.lambda[0], full.lambda[1], full.lambda[2]};
  const auto r = refine_syev(a, p);
  EXPECT_TRUE(r.step.partial_spectrum);
  EXPECT_EQ(r.step.e.rows(), 3u);
}

TEST(Sice, ExactPair) {
  const DenseMatrix a = DenseMatrix::diagonal(std::vector<double>{1, 2, 3});
  const auto r = sice_refine(a, std::vector<double>{0, 1, 0}, 2.0, 10);
  EXPECT_EQ(r.lambda, 2.0);
  EXPECT_EQ(r.x, (Vector{0, 1, 0}));
  EXPECT_LE(r.iters, 1u);
  EXPECT_EQ(r.s, 1u);
}

TEST(Sice, PerturbedPairConverges) {
  Rng rng(9);
  const std::size_t n = 60;
  const DenseMatrix a = random_symmetric(n, rng);
  const auto oracle_pairs = jacobi_eig(a, fp64, 1e-15);
  const double an = norm2_symmetric(a);
  for (std::size_t k : {0u, 17u, 59u}) {
    Vector x0(n);
    for (std::size_t i = 0; i < n; ++i) x0[i] = oracle_pairs.x(i, k) * (1 + 1e-3 * rng.uniform(-1, 1));
    const double lam0 = oracle_pairs.lambda[k] * (1 + 1e-3);
    const auto r = sice_refine(a, x0, lam0, 8);
    EXPECT_NEAR(r.lambda, oracle_pairs.lambda[k], 1e-14 * an) << k;
    EXPECT_EQ(r.x[r.s], 1.0);
    EXPECT_LE(r.iters, 8u);
  }
}

TEST(Sice, NormalizationHeldExactly) {
  Rng rng(10);
  const DenseMatrix a = random_symmetric(20, rng);
  const auto p = jacobi_eig(a, fp64, 1e-15);
  Vector x0(20);
  for (std::size_t i = 0; i < 20; ++i) x0[i] = p.x(i, 5) + 1e-2 * rng.uniform(-1, 1);
  for (std::size_t iters : {1u, 2u, 5u}) {
    const auto r = sice_refine(a, x0, p.lambda[5] + 1e-2, iters);
    EXPECT_EQ(r.x[r.s], 1.0);
    for (double v : r.x) EXPECT_LE(std::fabs(v), 1.0 + 1e-6);
  }
}

TEST(Sice, DegenerateStartIsReported) {
  // lambda0 = 3 is an eigenvalue, x0 lies in the other eigenvector's span.
  const DenseMatrix a = DenseMatrix::diagonal(std::vector<double>{1, 2, 3});
  std::optional<SiceResult> r;
  try {
    r = sice_refine(a, std::vector<double>{1, 0, 0}, 3.0, 10);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular_b);
    return;
  }
  // No exception: the result must not claim a wrong pair as converged.
  EXPECT_TRUE(!r->converged || std::fabs(r->lambda - 1.0) < 1e-12);
}

TEST(Sice, ZeroStartRejected) {
  EXPECT_THROW(sice_refine(DenseMatrix::identity(2), std::vector<double>{0, 0}, 1.0, 3), Error);
}
