#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/IterativeLinearSolvers>

#include "eigen_bridge.hpp"
#include "half.hpp"
#include "mplab/error.hpp"
#include "mplab/generate.hpp"
#include "mplab/sparse.hpp"

using namespace mplab;

namespace {

CsrMatrix random_csr(std::size_t n, std::size_t per_row, Rng& rng) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < per_row; ++k) t.push_back({i, rng.below(n), rng.uniform(-1, 1)});
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

Vector random_vector(std::size_t n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double sq_objective(std::span<const double> values, std::span<const double> centers) {
  double s = 0.0;
  for (double v : values) {
    const double d = v - centers[nearest_center(centers, v)];
    s += d * d;
  }
  return s;
}

CsrMatrix spd_csr(std::size_t n, Rng& rng) { return CsrMatrix::from_dense(spd_shifted(n, rng, 0.05)); }

}  // namespace

TEST(Csr, StructureValidation) {
  EXPECT_THROW(CsrMatrix(2, 2, {0, 1}, {0}, {1.0}), Error);            // offsets too short
  EXPECT_THROW(CsrMatrix(1, 2, {0, 2}, {1, 0}, {1.0, 2.0}), Error);    // unsorted columns
  EXPECT_THROW(CsrMatrix(1, 2, {0, 1}, {2}, {1.0}), Error);            // column out of range
  EXPECT_NO_THROW(CsrMatrix(1, 2, {0, 2}, {0, 1}, {1.0, 2.0}));
}

TEST(Csr, TripletsSumDuplicates) {
  const auto a = CsrMatrix::from_triplets(2, 2, {{1, 1, 1.0}, {0, 0, 2.0}, {1, 1, 0.5}});
  EXPECT_EQ(a.nnz(), 2u);
  EXPECT_EQ(a.to_dense()(1, 1), 1.5);
  EXPECT_EQ(a.to_dense()(0, 0), 2.0);
}

TEST(Csr, DenseRoundTrip) {
  Rng rng(1);
  const CsrMatrix a = random_csr(30, 4, rng);
  EXPECT_EQ(CsrMatrix::from_dense(a.to_dense()), a);
}

TEST(Spmv, Examples) {
  const auto d = CsrMatrix::from_dense(DenseMatrix{{2, 0}, {0, 3}});
  EXPECT_EQ(spmv(d, std::vector<double>{1, 1}), (Vector{2, 3}));
  const Vector x{0.1, 1.0 / 3.0, 7.0};
  const Vector y = spmv(CsrMatrix::identity(3), x, fp16);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y[i], oracle::round_half(x[i], oracle::HalfMode::nearest_even));
}

TEST(Spmv, Binary64SameOrderBitwise) {
  Rng rng(2);
  const CsrMatrix a = random_csr(200, 8, rng);
  const Vector x = random_vector(200, rng);
  const Vector y = spmv(a, x);
  const DenseMatrix d = a.to_dense();
  for (std::size_t i = 0; i < 200; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 200; ++j)
      if (d(i, j) != 0.0) acc += d(i, j) * x[j];
    EXPECT_EQ(y[i], acc);
  }
}

TEST(Spmv, MatchesEigenSparse) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const CsrMatrix a = random_csr(100, 6, rng);
    const Vector x = random_vector(100, rng);
    const Eigen::VectorXd ye = oracle::to_eigen(a) * oracle::to_eigen(x);
    const Vector y = spmv(a, x);
    for (std::size_t i = 0; i < 100; ++i) EXPECT_NEAR(y[i], ye(i), 1e-14);
  }
}

TEST(Spmv, LowPrecisionErrorBound) {
  Rng rng(4);
  const CsrMatrix a = random_csr(100, 10, rng);
  const Vector x = random_vector(100, rng);
  const Vector y64 = spmv(a, x);
  const Vector y32 = spmv(a, x, fp32);
  for (std::size_t i = 0; i < 100; ++i) {
    double absrow = 0.0;
    for (std::size_t k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k)
      absrow += std::fabs(a.values()[k] * x[a.col_indices()[k]]);
    // Inputs rounded, then ~nnz_row + 1 roundings per entry.
    EXPECT_LE(std::fabs(y32[i] - y64[i]), 14 * fp32.unit_roundoff() * absrow * 1.01);
  }
}

TEST(Spmv, DimensionMismatch) {
  EXPECT_THROW(spmv(CsrMatrix::identity(3), std::vector<double>{1, 2}), Error);
}

TEST(KMeans, Examples) {
  Rng rng(5);
  EXPECT_EQ(kmeans1d(std::vector<double>{0, 0, 1, 1}, 2, 20, rng), (Vector{0, 1}));
  const Vector c = kmeans1d(std::vector<double>{0.9, 1.1, 1.9, 2.1}, 2, 20, rng);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(c[0], 1.0, 1e-15);
  EXPECT_NEAR(c[1], 2.0, 1e-15);
  const Vector one = kmeans1d(std::vector<double>{1, 2, 3, 6}, 1, 20, rng);
  EXPECT_EQ(one, (Vector{3.0}));
}

TEST(KMeans, OptimalTwoPartition) {
  // Exhaustive optimum over the contiguous splits of sorted data.
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    Vector v(12);
    for (double& x : v) x = rng.uniform(0, 1) + (rng.uniform() < 0.5 ? 5.0 : 0.0);
    std::sort(v.begin(), v.end());
    double best = INFINITY;
    for (std::size_t s = 1; s < v.size(); ++s) {
      double m1 = 0, m2 = 0;
      for (std::size_t i = 0; i < s; ++i) m1 += v[i];
      for (std::size_t i = s; i < v.size(); ++i) m2 += v[i];
      m1 /= s;
      m2 /= v.size() - s;
      double obj = 0;
      for (std::size_t i = 0; i < v.size(); ++i) obj += std::pow(v[i] - (i < s ? m1 : m2), 2);
      best = std::min(best, obj);
    }
    const Vector c = kmeans1d(v, 2, 100, rng);
    if (c.size() == 2) EXPECT_LE(sq_objective(v, c), best * (1 + 1e-12) + 1e-15);
  }
}

TEST(KMeans, ObjectiveNonIncreasing) {
  Rng rng(7);
  Vector v(2000);
  for (double& x : v) x = rng.normal() * (rng.uniform() < 0.3 ? 0.1 : 1.0);
  const auto r = kmeans1d_detailed(v, 16, 50, rng);
  for (std::size_t i = 1; i < r.inertia.size(); ++i)
    EXPECT_LE(r.inertia[i], r.inertia[i - 1] * (1 + 1e-12));
  EXPECT_TRUE(std::is_sorted(r.centers.begin(), r.centers.end()));
}

TEST(KMeans, FewDistinctValuesAndBadK) {
  Rng rng(8);
  EXPECT_EQ(kmeans1d(std::vector<double>{2, 1, 2, 1}, 5, 10, rng), (Vector{1, 2}));
  EXPECT_THROW(kmeans1d(std::vector<double>{}, 1, 10, rng), Error);
  EXPECT_THROW(kmeans1d(std::vector<double>{1}, 257, 10, rng), Error);
  EXPECT_THROW(kmeans1d(std::vector<double>{1}, 0, 10, rng), Error);
}

TEST(KMeans, NearestCenterTiesLow) {
  const Vector c{0.0, 1.0, 2.0};
  EXPECT_EQ(nearest_center(c, 0.5), 0u);
  EXPECT_EQ(nearest_center(c, 1.5), 1u);
  EXPECT_EQ(nearest_center(c, -3.0), 0u);
  EXPECT_EQ(nearest_center(c, 9.0), 2u);
}

TEST(Clustered, IdentityOneCenter) {
  Rng rng(9);
  const auto m = compress_clustered(CsrMatrix::identity(10), 1, 1e-3, rng);
  ASSERT_EQ(m.centers.size(), 1u);
  EXPECT_EQ(m.centers[0], 1.0);
  for (double r : m.residuals) EXPECT_EQ(r, 0.0);
  EXPECT_EQ(m.residual_fmt[0], fp16);
  const Vector x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_EQ(spmv_clustered(m, x), x);
}

TEST(Clustered, LosslessAtZeroTau) {
  Rng rng(10);
  const CsrMatrix a = random_csr(300, 10, rng);
  const auto m = compress_clustered(a, 64, 0.0, rng);
  // Clusters whose members all equal the center are exact in any format.
  for (std::size_t k = 0; k < m.nnz(); ++k)
    if (m.residuals[k] != 0.0) EXPECT_EQ(m.residual_fmt[m.ids[k]], fp64);
  const Vector rec = m.reconstruct();
  for (std::size_t k = 0; k < a.nnz(); ++k) EXPECT_EQ(rec[k], a.values()[k]);
  const Vector x = random_vector(300, rng);
  EXPECT_EQ(spmv_clustered(m, x), spmv(a, x));
}

TEST(Clustered, StructuralInvariants) {
  Rng rng(11);
  const CsrMatrix a = random_csr(200, 10, rng);
  for (double tau : {1e-2, 1e-5, 1e-9}) {
    const auto m = compress_clustered(a, 256, tau, rng);
    EXPECT_LE(m.centers.size(), kMaxClusters);
    const double vmax = *std::max_element(a.values().begin(), a.values().end(),
                                          [](double p, double q) { return std::fabs(p) < std::fabs(q); });
    for (std::size_t k = 0; k < m.nnz(); ++k) {
      ASSERT_LT(m.ids[k], m.centers.size());
      const Format& f = m.residual_fmt[m.ids[k]];
      EXPECT_EQ(round_value(m.residuals[k], f), m.residuals[k]);
      const double v = a.values()[k];
      // Chosen format meets the tau rule, and the half-ulp bound holds.
      EXPECT_LE(std::fabs(m.value(k) - v), tau * std::max(std::fabs(v), tau * std::fabs(vmax)) * (1 + 1e-12));
      const double d = std::fabs(v - m.centers[m.ids[k]]);
      // Half an ulp at |v - c|, which bottoms out at the subnormal spacing.
      const int bias = (1 << (f.exp_bits - 1)) - 1;
      const double half_sub = std::ldexp(1.0, 1 - bias - f.sig_bits - 1);
      EXPECT_LE(std::fabs(m.value(k) - v), std::max(f.unit_roundoff() * d, half_sub) +
                                               2 * fp64.unit_roundoff() * std::fabs(v));
    }
  }
}

TEST(Clustered, ForwardErrorBound) {
  Rng rng(12);
  const CsrMatrix a = random_csr(300, 10, rng);
  const double tau = 1e-4;
  const auto m = compress_clustered(a, 128, tau, rng);
  const Vector x = random_vector(300, rng);
  const Vector yc = spmv_clustered(m, x);
  const Vector y = spmv(a, x);
  double absmax = 0.0, err = 0.0;
  for (std::size_t i = 0; i < 300; ++i) {
    double s = 0.0;
    for (std::size_t k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k)
      s += std::fabs(a.values()[k] * x[a.col_indices()[k]]);
    absmax = std::max(absmax, s);
    err = std::max(err, std::fabs(yc[i] - y[i]));
  }
  EXPECT_LE(err, absmax * (tau + 300 * fp64.unit_roundoff()));
}

TEST(Clustered, NarrowDistributionBoundBeatsBinary32) {
  // Two lobes at +-1.5: the fp16 half-ulp at |v - c| must undercut the fp32
  // half-ulp at |v| (2^-24 for |v| in [1, 2)).
  Rng rng(13);
  std::vector<Triplet> t;
  const std::size_t n = 200;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 50; ++k) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      // Distinct columns: summed duplicates would land near zero.
      t.push_back({i, (i + 4 * k) % n, sign * (1.5 + 2e-3 * rng.normal())});
    }
  const CsrMatrix a = CsrMatrix::from_triplets(n, n, std::move(t));
  const auto m = compress_clustered(a, 256, 0.0, rng, fp16);
  const double half_sub16 = std::ldexp(1.0, -25);
  std::size_t better = 0;
  for (std::size_t k = 0; k < a.nnz(); ++k) {
    const double v = a.values()[k];
    const double d = std::fabs(v - m.centers[m.ids[k]]);
    const double b16 = std::max(fp16.unit_roundoff() * d, half_sub16);
    int e = 0;
    std::frexp(v, &e);
    const double b32 = std::ldexp(1.0, e - 1 - 24);
    if (b16 < b32) ++better;
    EXPECT_LE(std::fabs(m.value(k) - v), b16 * (1 + 1e-9));
  }
  EXPECT_GE(better, a.nnz() * 99 / 100);
}

TEST(Footprint, Tally) {
  Rng rng(14);
  const CsrMatrix a = random_csr(100, 10, rng);
  const auto h = compress_clustered(a, 16, 0.0, rng, fp16);
  const double n = static_cast<double>(a.nnz());
  EXPECT_DOUBLE_EQ(footprint_bits(h).bits_per_value, 24.0 + 64.0 * h.centers.size() / n);
  const auto d = compress_clustered(a, 16, 0.0, rng, fp64);
  EXPECT_DOUBLE_EQ(footprint_bits(d).bits_per_value, 72.0 + 64.0 * d.centers.size() / n);
  const auto mixed = compress_clustered(a, 64, 1e-5, rng);
  std::size_t bits = 64 * mixed.centers.size();
  for (std::uint8_t id : mixed.ids) {
    const Format& f = mixed.residual_fmt[id];
    bits += 8 + 1 + f.exp_bits + f.sig_bits;
  }
  EXPECT_EQ(footprint_bits(mixed).total_bits, bits);
}

TEST(BlockJacobi, IdentityAllHalf) {
  const auto p = block_jacobi_build(CsrMatrix::identity(70));
  EXPECT_EQ(p.blocks(), 3u);
  EXPECT_EQ(p.block_starts, (std::vector<std::size_t>{0, 32, 64, 70}));
  for (const auto& f : p.block_fmt) EXPECT_EQ(f, fp16);
  const Vector v(70, 0.3);
  EXPECT_EQ(block_jacobi_apply(p, v), v);
}

TEST(BlockJacobi, LargeEntriesExcludeHalf) {
  // Inverse of diag(1e-9) has entries 1e9, beyond binary16 range.
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < 8; ++i) t.push_back({i, i, i < 4 ? 1e-9 : 1.0});
  BlockJacobiOptions opt;
  opt.block_size = 4;
  const auto p = block_jacobi_build(CsrMatrix::from_triplets(8, 8, t), opt);
  EXPECT_NE(p.block_fmt[0], fp16);
  EXPECT_EQ(p.block_fmt[1], fp16);
}

TEST(BlockJacobi, SingularBlockFallsBack) {
  std::vector<Triplet> t{{0, 0, 1.0}, {1, 1, 0.0}, {2, 2, 1.0}, {3, 3, 1.0}};
  BlockJacobiOptions opt;
  opt.block_size = 2;
  const auto p = block_jacobi_build(CsrMatrix::from_triplets(4, 4, t), opt);
  EXPECT_TRUE(p.singular[0]);
  EXPECT_FALSE(p.singular[1]);
  EXPECT_EQ(block_jacobi_apply(p, std::vector<double>{1, 2, 3, 4})[1], 2.0);
}

TEST(BlockJacobi, Fp64TagsApplyExactInverse) {
  Rng rng(15);
  const CsrMatrix a = spd_csr(64, rng);
  BlockJacobiOptions opt;
  opt.block_size = 16;
  opt.force_fmt = fp64;
  const auto p = block_jacobi_build(a, opt);
  const Eigen::MatrixXd ad = oracle::to_eigen(a.to_dense());
  const Vector v = random_vector(64, rng);
  const Vector y = block_jacobi_apply(p, v);
  for (std::size_t b = 0; b < 4; ++b) {
    const Eigen::VectorXd yb =
        ad.block(16 * b, 16 * b, 16, 16).inverse() * oracle::to_eigen(v).segment(16 * b, 16);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(y[16 * b + i], yb(i), 1e-12 * yb.norm());
  }
}

TEST(BlockJacobi, ConstantLinearOperator) {
  Rng rng(16);
  const CsrMatrix a = spd_csr(100, rng);
  const auto p = block_jacobi_build(a);
  const Vector u = random_vector(100, rng), v = random_vector(100, rng);
  EXPECT_EQ(block_jacobi_apply(p, u), block_jacobi_apply(p, u));
  Vector w(100);
  for (std::size_t i = 0; i < 100; ++i) w[i] = 2.0 * u[i] - 3.0 * v[i];
  const Vector pu = block_jacobi_apply(p, u), pv = block_jacobi_apply(p, v), pw = block_jacobi_apply(p, w);
  double scale = 0.0;
  for (double x : pw) scale = std::max(scale, std::fabs(x));
  for (std::size_t i = 0; i < 100; ++i)
    EXPECT_NEAR(pw[i], 2.0 * pu[i] - 3.0 * pv[i], 100 * fp64.unit_roundoff() * (scale + 5));
}

TEST(BlockJacobi, StoredEntriesRepresentableAndLadderMonotone) {
  Rng rng(17);
  const CsrMatrix a = spd_csr(128, rng);
  const auto p = block_jacobi_build(a);
  std::set<int> tags;
  for (std::size_t b = 0; b < p.blocks(); ++b) {
    tags.insert(p.block_fmt[b].sig_bits);
    for (double v : p.inv_blocks[b].data()) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_EQ(round_value(v, p.block_fmt[b]), v);
    }
  }
  // A coarser choice under a looser threshold never needs a finer format.
  BlockJacobiOptions loose;
  loose.digit_tau = 0.5;
  const auto q = block_jacobi_build(a, loose);
  for (std::size_t b = 0; b < p.blocks(); ++b)
    EXPECT_LE(q.block_fmt[b].sig_bits, p.block_fmt[b].sig_bits);
}

TEST(Pcg, Identity) {
  Rng rng(18);
  const Vector b = random_vector(20, rng);
  const auto r = pcg(CsrMatrix::identity(20), b, nullptr, 1e-12, 10);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.status, PcgStatus::converged);
}

TEST(Pcg, DiagonalFiniteTermination) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < 30; ++i) t.push_back({i, i, 1.0 + static_cast<double>(i % 4)});
  const auto a = CsrMatrix::from_triplets(30, 30, t);
  const auto r = pcg(a, Vector(30, 1.0), nullptr, 1e-12, 100);
  EXPECT_EQ(r.status, PcgStatus::converged);
  EXPECT_LE(r.iterations, 4u + 2u);
}

TEST(Pcg, MatchesEigenCg) {
  Rng rng(19);
  const CsrMatrix a = spd_csr(150, rng);
  const Vector b = random_vector(150, rng);
  const auto p = block_jacobi_build(a);
  const auto r = pcg(a, b, &p, 1e-10, 500);
  ASSERT_EQ(r.status, PcgStatus::converged);
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-12);
  const auto ae = oracle::to_eigen(a);  // cg keeps a reference
  cg.compute(ae);
  const Eigen::VectorXd xe = cg.solve(oracle::to_eigen(b));
  EXPECT_LE((oracle::to_eigen(r.x) - xe).norm() / xe.norm(), 1e-7);
  for (std::size_t k = 0; k + 1 < r.res_history.size(); ++k) EXPECT_TRUE(std::isfinite(r.res_history[k]));
}

TEST(Pcg, LaplacianAdaptiveMatchesFp64) {
  const CsrMatrix a = laplacian2d(32);
  const Vector b(a.rows(), 1.0);
  const auto adaptive = block_jacobi_build(a);
  BlockJacobiOptions ref;
  ref.force_fmt = fp64;
  const auto full = block_jacobi_build(a, ref);
  const auto r1 = pcg(a, b, &adaptive, 1e-10, 1000);
  const auto r2 = pcg(a, b, &full, 1e-10, 1000);
  EXPECT_EQ(r1.status, PcgStatus::converged);
  EXPECT_LE(r1.iterations, r2.iterations * 11 / 10);
}

TEST(Pcg, IndefiniteDetected) {
  const auto a = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, -1.0}});
  const auto r = pcg(a, std::vector<double>{0.0, 1.0}, nullptr, 1e-12, 10);
  EXPECT_EQ(r.status, PcgStatus::indefinite);
}
