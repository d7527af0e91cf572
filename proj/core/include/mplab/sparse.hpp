#pragma once
//
// CSR matrices, emulated SpMV, clustered value compression, and the
// adaptive-storage block-Jacobi preconditioner with a PCG driver.
//

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mplab/dense.hpp"
#include "mplab/prec.hpp"

namespace mplab {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

class CsrMatrix {
 public:
  CsrMatrix() = default;
  /// Validates the structure; throws Error(invalid_argument).
  CsrMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, std::vector<double> values);

  /// Sorts by (row, col) and sums duplicates. Explicit zeros are kept.
  static CsrMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                 std::vector<Triplet> entries);
  /// Nonzero entries of a dense matrix.
  static CsrMatrix from_dense(const DenseMatrix& a);
  static CsrMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return n_rows_; }
  std::size_t cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }

  DenseMatrix to_dense() const;
  /// Copy sharing this structure with different values.
  CsrMatrix with_values(std::vector<double> values) const;

  bool operator==(const CsrMatrix&) const = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

/// y_i = sum_j a_ij x_j in column order, every operation rounded in fmt.
Vector spmv(const CsrMatrix& a, std::span<const double> x, const Format& fmt = fp64);

// --- clustering ----------------------------------------------------------

struct KMeans1d {
  Vector centers;             // sorted ascending
  std::vector<double> inertia;  // objective after seeding and after each Lloyd step
};

/// Lloyd iterations on scalars with k-means++ seeding. If there are fewer
/// distinct values than k the distinct values themselves are returned.
/// Throws Error(invalid_argument) for empty input or k outside [1, 256].
KMeans1d kmeans1d_detailed(std::span<const double> values, std::size_t k,
                           std::size_t max_iters, Rng& rng);
Vector kmeans1d(std::span<const double> values, std::size_t k, std::size_t max_iters, Rng& rng);

/// Index of the nearest center in a sorted list; ties go to the lower index.
std::size_t nearest_center(std::span<const double> centers, double v);

inline constexpr std::size_t kMaxClusters = 256;

struct ClusteredCsr {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_offsets;
  std::vector<std::size_t> col_indices;
  Vector centers;                   // binary64, at most 256
  std::vector<std::uint8_t> ids;    // one per nonzero
  std::vector<Format> residual_fmt; // one per cluster
  Vector residuals;                 // one per nonzero, representable in its cluster's format

  std::size_t nnz() const noexcept { return ids.size(); }
  double value(std::size_t k) const { return centers[ids[k]] + residuals[k]; }
  Vector reconstruct() const;
  CsrMatrix to_csr() const;
};

/// Clusters the values and stores each as (cluster id, residual). Each
/// cluster gets the coarsest of fp16/fp32/fp64 meeting
/// |v_hat - v| <= tau * max(|v|, tau * max|values|), unless `force_fmt` fixes
/// the residual format for every cluster. Values that no rung reproduces
/// within the bound move to a cluster centred at 0.
ClusteredCsr compress_clustered(const CsrMatrix& a, std::size_t k, double tau, Rng& rng,
                                std::optional<Format> force_fmt = std::nullopt,
                                std::size_t max_iters = 50);

/// Binary64 product over the reconstructed values.
Vector spmv_clustered(const ClusteredCsr& m, std::span<const double> x);

struct Footprint {
  double bits_per_value = 0.0;
  std::size_t total_bits = 0;
};

/// 8 bits per id, the residual format's width per nonzero, 64 per center.
Footprint footprint_bits(const ClusteredCsr& m);

// --- block-Jacobi --------------------------------------------------------

enum class Regularity {
  frobenius,  // ||round(B) - B||_F <= digit_tau ||B||_F
  condition,  // kappa_1(round(B)) <= (1 + digit_tau) kappa_1(B)
};

struct BlockJacobiOptions {
  std::size_t block_size = 32;
  double digit_tau = 0.1;
  Regularity regularity = Regularity::frobenius;
  std::optional<Format> force_fmt;  // skip selection, e.g. an all-fp64 reference
};

struct BlockJacobiPrecond {
  std::size_t n = 0;
  std::vector<std::size_t> block_starts;  // size blocks + 1
  std::vector<DenseMatrix> inv_blocks;    // stored (rounded) entries
  std::vector<Format> block_fmt;
  std::vector<bool> singular;             // block replaced by the identity

  std::size_t blocks() const noexcept { return inv_blocks.size(); }
};

/// Inverts the diagonal blocks in binary64 and stores each in the coarsest
/// of fp16/fp32/fp64 that keeps its range and regularity.
BlockJacobiPrecond block_jacobi_build(const CsrMatrix& a, const BlockJacobiOptions& opt = {});

/// Binary64 block products on the stored entries.
Vector block_jacobi_apply(const BlockJacobiPrecond& p, std::span<const double> v);

enum class PcgStatus { converged, not_converged, indefinite };

std::string_view to_string(PcgStatus s) noexcept;

struct PcgResult {
  Vector x;
  std::size_t iterations = 0;
  std::vector<double> res_history;  // ||b - A x_k||_2 / ||b||_2, starting at x_0 = 0
  PcgStatus status = PcgStatus::not_converged;
};

/// Preconditioned CG in binary64 from x_0 = 0; stops at
/// ||b - A x||_2 <= tol ||b||_2 or after maxit iterations.
PcgResult pcg(const CsrMatrix& a, std::span<const double> b, const BlockJacobiPrecond* precond,
              double tol, std::size_t maxit);

}  // namespace mplab
