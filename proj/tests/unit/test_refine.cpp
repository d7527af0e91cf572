#include <gtest/gtest.h>

#include <cmath>

#include "eigen_bridge.hpp"
#include "mplab/error.hpp"
#include "mplab/generate.hpp"
#include "mplab/refine.hpp"

using namespace mplab;

namespace {

Vector random_vector(std::size_t n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

IrConfig config(const Format& f, double tol = 1e-14) {
  IrConfig cfg;
  cfg.fact_fmt = f;
  cfg.tol = tol;
  return cfg;
}

LinearOperator dense_op(const DenseMatrix& a) {
  return [&a](std::span<const double> v) { return matvec(a, v); };
}

}  // namespace

TEST(BackwardError, Trivial) {
  const DenseMatrix a{{2.0, 0.0}, {0.0, 2.0}};
  EXPECT_EQ(backward_error(a, std::vector<double>{1.0, 1.0}, std::vector<double>{2.0, 2.0}), 0.0);
  EXPECT_EQ(backward_error(DenseMatrix::identity(3), std::vector<double>{1, 2, 3},
                           std::vector<double>{1, 2, 3}),
            0.0);
}

TEST(BackwardError, DirectFormula) {
  Rng rng(1);
  const DenseMatrix a = uniform_matrix(8, 8, rng);
  const Vector x = random_vector(8, rng);
  Vector b = matvec(a, x);
  Vector xp = x;
  xp[3] += 1e-6;
  const Eigen::MatrixXd ae = oracle::to_eigen(a);
  const Eigen::VectorXd r = oracle::to_eigen(b) - ae * oracle::to_eigen(xp);
  const double expect =
      r.lpNorm<Eigen::Infinity>() /
      (ae.cwiseAbs().rowwise().sum().maxCoeff() * oracle::to_eigen(xp).lpNorm<Eigen::Infinity>() +
       oracle::to_eigen(b).lpNorm<Eigen::Infinity>());
  // The residual cancels down from O(1) terms, so agreement is ~u/1e-6.
  EXPECT_NEAR(backward_error(a, xp, b), expect, 1e-8 * expect);
}

TEST(BackwardError, ZeroDenominator) {
  const DenseMatrix a{{1.0}};
  EXPECT_EQ(backward_error(a, std::vector<double>{0.0}, std::vector<double>{0.0}), 0.0);
  // ||b|| in the denominator keeps x = 0 finite.
  EXPECT_EQ(backward_error(DenseMatrix(1, 1), std::vector<double>{0.0}, std::vector<double>{1.0}),
            1.0);
}

TEST(IrConfig, Validation) {
  IrConfig cfg;
  cfg.fact_fmt = fp64;
  cfg.work_fmt = fp32;
  EXPECT_THROW(cfg.validate(), Error);  // work coarser than fact
  cfg = IrConfig{};
  cfg.resid_fmt = fp32;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = IrConfig{};
  cfg.tol = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_NO_THROW(IrConfig{}.validate());
}

TEST(IrSolve, IdentityConvergesImmediately) {
  // b representable in every factor format; otherwise the first solve
  // rounds b and a few steps are needed.
  const DenseMatrix a = DenseMatrix::identity(20);
  Vector b(20);
  for (std::size_t i = 0; i < 20; ++i) b[i] = static_cast<double>(i) - 7.5;
  for (const auto& f : {fp16, bf16, fp32}) {
    const auto r = ir_solve(a, b, config(f, 0.0));
    EXPECT_TRUE(r.report.converged) << format_name(f);
    EXPECT_LE(r.report.iterations, 1u);
    EXPECT_LE(r.report.backward_errors.back(), fp64.unit_roundoff());
  }
}

TEST(IrSolve, IdentityGeneralRhs) {
  Rng rng(2);
  const Vector b = random_vector(20, rng);
  const auto r = ir_solve(DenseMatrix::identity(20), b, config(fp16, 0.0));
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.iterations, 6u);
}

TEST(IrSolve, Fp32FactorsModerateCondition) {
  Rng rng(3);
  const DenseMatrix a = randsvd(100, 100, 1e3, rng);
  const Vector x = random_vector(100, rng);
  const Vector b = matvec(a, x);
  const auto r = ir_solve(a, b, config(fp32), x);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.iterations, 10u);
  EXPECT_EQ(r.report.forward_errors.size(), r.report.backward_errors.size());
  EXPECT_EQ(r.report.backward_errors.size(), r.report.iterations + 1);
}

TEST(IrSolve, Fp16IllConditionedDoesNotConverge) {
  Rng rng(4);
  const DenseMatrix a = randsvd(100, 100, 1e6, rng);
  const Vector b = matvec(a, random_vector(100, rng));
  IrConfig cfg = config(fp16);
  cfg.max_iters = 20;
  const auto r = ir_solve(a, b, cfg);
  EXPECT_FALSE(r.report.converged);
  EXPECT_NE(r.report.status, IrStatus::converged);
}

TEST(IrSolve, AllFp64MatchesDirectSolve) {
  Rng rng(5);
  const std::size_t n = 40;
  const DenseMatrix a = randsvd(n, n, 10.0, rng);
  const Vector b = random_vector(n, rng);
  IrConfig cfg = config(fp64, 0.0);
  const auto r = ir_solve(a, b, cfg);
  const Eigen::VectorXd xe = oracle::to_eigen(a).partialPivLu().solve(oracle::to_eigen(b));
  EXPECT_LE((oracle::to_eigen(r.x) - xe).lpNorm<Eigen::Infinity>() / xe.lpNorm<Eigen::Infinity>(),
            10 * n * fp64.unit_roundoff());
  cfg.inner = GmresOptions{};
  const auto g = gmres_ir_solve(a, b, cfg);
  EXPECT_LE((oracle::to_eigen(g.x) - xe).lpNorm<Eigen::Infinity>() / xe.lpNorm<Eigen::Infinity>(),
            10 * n * fp64.unit_roundoff());
}

TEST(IrSolve, ConvergedImpliesTolerance) {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const DenseMatrix a = randsvd(30, 30, std::pow(10.0, t % 5), rng);
    const Vector b = random_vector(30, rng);
    for (const auto& f : {fp16, bf16, fp32}) {
      const auto r = ir_solve(a, b, config(f, 1e-13));
      if (r.report.converged) EXPECT_LE(r.report.backward_errors.back(), 1e-13);
    }
  }
}

TEST(IrSolve, LowPrecisionIterateEscalates) {
  Rng rng(7);
  const DenseMatrix a = randsvd(30, 30, 10.0, rng);
  const Vector b = random_vector(30, rng);
  IrConfig cfg = config(fp32, 1e-14);
  cfg.x_fmt = fp32;
  cfg.max_iters = 30;
  const auto stuck = ir_solve(a, b, cfg);
  EXPECT_FALSE(stuck.report.converged);
  cfg.escalate = true;
  const auto r = ir_solve(a, b, cfg);
  EXPECT_TRUE(r.report.converged);
  EXPECT_FALSE(r.report.events.empty());
}

TEST(IrSolve, SingularMatrixIsTyped) {
  DenseMatrix a(3, 3);
  a(0, 0) = 1.0;
  try {
    ir_solve(a, std::vector<double>{1, 1, 1}, config(fp32));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::factorization_failed);
  }
}

TEST(Gmres, IdentityOneIteration) {
  const DenseMatrix i5 = DenseMatrix::identity(5);
  const Vector e1{1, 0, 0, 0, 0};
  const auto r = gmres(dense_op(i5), {}, e1, 1e-12, 5, fp64);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.z, e1);
}

TEST(Gmres, FiniteTerminationDiagonal) {
  const DenseMatrix d = DenseMatrix::diagonal(std::vector<double>{1, 2, 3, 4, 5});
  const Vector b{1, 1, 1, 1, 1};
  const auto r = gmres(dense_op(d), {}, b, 1e-12, 10, fp64);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(r.z[i], 1.0 / (i + 1), 1e-13);
}

TEST(Gmres, FiniteTerminationRandom) {
  Rng rng(8);
  for (std::size_t n : {10u, 30u, 50u}) {
    const DenseMatrix a = randsvd(n, n, 100.0, rng);
    const Vector b = random_vector(n, rng);
    const auto r = gmres(dense_op(a), {}, b, 1e-12, n, fp64);
    EXPECT_TRUE(r.converged) << n;
    const Eigen::VectorXd xe = oracle::to_eigen(a).partialPivLu().solve(oracle::to_eigen(b));
    EXPECT_LE((oracle::to_eigen(r.z) - xe).norm() / xe.norm(), 1e-9);
  }
}

TEST(Gmres, ResidualHistoryNonIncreasing) {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const DenseMatrix a = uniform_matrix(25, 25, rng);
    const Vector b = random_vector(25, rng);
    for (const auto& f : {fp32, fp64}) {
      const auto r = gmres(dense_op(a), {}, b, 1e-10, 25, f);
      for (std::size_t k = 1; k < r.res_history.size(); ++k)
        EXPECT_LE(r.res_history[k], r.res_history[k - 1] * (1 + 10 * f.unit_roundoff()));
    }
  }
}

TEST(Gmres, RestartStillConverges) {
  // Near-identity keeps the field of values away from 0; restarted GMRES
  // can stall on randsvd matrices.
  Rng rng(10);
  DenseMatrix a = uniform_matrix(30, 30, rng);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j) a(i, j) = (i == j ? 1.0 : 0.0) + 0.02 * a(i, j);
  const Vector b = random_vector(30, rng);
  const auto r = gmres(dense_op(a), {}, b, 1e-10, 200, fp64, 5);
  EXPECT_TRUE(r.converged);
  Vector res = matvec(a, r.z);
  for (std::size_t i = 0; i < res.size(); ++i) res[i] -= b[i];
  EXPECT_LE(norm2(res) / norm2(b), 1e-9);
}

TEST(GmresIr, IdentityOneStep) {
  const DenseMatrix a = DenseMatrix::identity(10);
  Rng rng(11);
  const Vector b = random_vector(10, rng);
  IrConfig cfg = config(fp16, 0.0);
  cfg.inner = GmresOptions{};
  const auto r = gmres_ir_solve(a, b, cfg);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.iterations, 1u);
  for (auto k : r.report.inner_iterations) EXPECT_LE(k, 1u);
}

TEST(GmresIr, RelaxesConditionLimit) {
  Rng rng(12);
  const DenseMatrix a = randsvd(100, 100, 1e6, rng);
  const Vector b = matvec(a, random_vector(100, rng));
  IrConfig cfg = config(fp16);
  cfg.max_iters = 20;
  const auto plain = ir_solve(a, b, cfg);
  cfg.inner = GmresOptions{};
  const auto g = gmres_ir_solve(a, b, cfg);
  EXPECT_FALSE(plain.report.converged);
  EXPECT_TRUE(g.report.converged);
  EXPECT_LE(g.report.backward_errors.back(), 1e-14);
  ASSERT_FALSE(g.report.inner_iterations.empty());
  for (auto k : g.report.inner_iterations) EXPECT_LE(k, 100u);
}

TEST(GmresIr, TriangularSolvesOnly) {
  // Each GMRES step costs exactly two triangular solves.
  Rng rng(13);
  const DenseMatrix a = randsvd(20, 20, 1e3, rng);
  const Vector b = random_vector(20, rng);
  IrConfig cfg = config(fp16);
  cfg.inner = GmresOptions{};
  const auto g = gmres_ir_solve(a, b, cfg);
  std::size_t inner = 0;
  for (auto k : g.report.inner_iterations) inner += k;
  EXPECT_GE(g.report.tri_solves, 2 * inner);
}

TEST(GmresIr, RequiresInnerOptions) {
  EXPECT_THROW(gmres_ir_solve(DenseMatrix::identity(2), std::vector<double>{1, 1}, config(fp32)),
               Error);
}

TEST(Lsq, OneDimensionalMean) {
  const DenseMatrix a{{1.0}, {1.0}};
  const auto r = lsq_gmres_ir(a, std::vector<double>{1.0, 3.0}, config(fp16, 1e-15));
  ASSERT_EQ(r.x.size(), 1u);
  EXPECT_NEAR(r.x[0], 2.0, 1e-14);
}

TEST(Lsq, OrthonormalColumns) {
  Rng rng(14);
  const DenseMatrix q = random_orthonormal(50, 8, rng);
  const Vector y = random_vector(8, rng);
  const Vector b = matvec(q, y);
  const auto r = lsq_gmres_ir(q, b, config(fp16));
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.iterations, 2u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(r.x[i], y[i], 1e-13);
}

TEST(Lsq, MatchesQrOracle) {
  Rng rng(15);
  const DenseMatrix a = randsvd(200, 30, 100.0, rng);
  const Vector b = random_vector(200, rng);
  const auto r = lsq_gmres_ir(a, b, config(fp16));
  EXPECT_TRUE(r.report.converged);
  const Eigen::VectorXd xq = oracle::to_eigen(a).colPivHouseholderQr().solve(oracle::to_eigen(b));
  const double ref = normal_equations_backward_error(a, oracle::from_eigen_vec(xq), b);
  EXPECT_LE(normal_equations_backward_error(a, r.x, b), std::max(10 * ref, 1e-14));
  EXPECT_LE((oracle::to_eigen(r.x) - xq).norm() / xq.norm(), 1e-10);
}

TEST(Lsq, PreconditionerCostLinear) {
  Rng rng(16);
  for (std::size_t m : {100u, 200u}) {
    const std::size_t n = 20;
    const DenseMatrix a = randsvd(m, n, 10.0, rng);
    const auto r = lsq_gmres_ir(a, random_vector(m, rng), config(fp32));
    EXPECT_LE(r.flops_per_apply, 4 * m * n + 2 * n * n + 2 * n);
    EXPECT_GE(r.flops_per_apply, 4 * m * n);
  }
}

TEST(Lsq, RankDeficientOrZeroColumn) {
  DenseMatrix a(10, 3);
  for (std::size_t i = 0; i < 10; ++i) a(i, 0) = a(i, 1) = 1.0 + i;
  for (std::size_t i = 0; i < 10; ++i) a(i, 2) = 0.0;
  EXPECT_THROW(lsq_gmres_ir(a, Vector(10, 1.0), config(fp16)), Error);
}

TEST(Orthogonality, Defect) {
  EXPECT_EQ(orthogonality_defect(DenseMatrix::identity(4)), 0.0);
  DenseMatrix v(3, 2);
  v(0, 0) = v(0, 1) = 1.0;
  EXPECT_NEAR(orthogonality_defect(v), std::sqrt(2.0), 1e-15);
}

TEST(Orthogonality, LowerPrecisionLosesMore) {
  Rng rng(17);
  const DenseMatrix a = randsvd(60, 20, 1e8, rng);
  const double d32 = orthogonality_defect(mgs_orthonormalize(a, fp32));
  const double d64 = orthogonality_defect(mgs_orthonormalize(a, fp64));
  EXPECT_GT(d32, d64);
}
