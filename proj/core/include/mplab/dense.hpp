#pragma once
//
// Dense matrices and the emulated-precision kernels built on them: GEMM,
// LU with partial pivoting, Cholesky, triangular solves, and the
// scaling/shifting steps that squeeze a matrix into a narrow format.
//

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "mplab/prec.hpp"

namespace mplab {

using Vector = std::vector<double>;

// Row-major rows x cols matrix of binary64 values.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  Vector column(std::size_t j) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transpose() const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// --- binary64 helpers ----------------------------------------------------

double norm_inf(const DenseMatrix& a);
double norm_inf(std::span<const double> v);
double norm_fro(const DenseMatrix& a);
double norm2(std::span<const double> v);
double max_abs(const DenseMatrix& a);

Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// a^T x
Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Entrywise round_value.
DenseMatrix round_matrix(const DenseMatrix& a, const Format& fmt, Rng* rng = nullptr);

/// True when every entry is a fixed point of round-to-nearest in fmt.
bool all_representable(const DenseMatrix& a, const Format& fmt);
bool all_finite(const DenseMatrix& a);

// --- emulated kernels ----------------------------------------------------

/// alpha * a * b + beta * c. Inputs a, b are rounded to in_fmt; every
/// multiply and accumulate is rounded in acc_fmt.
DenseMatrix gemm_emulated(const DenseMatrix& a, const DenseMatrix& b,
                          const DenseMatrix& c, double alpha, double beta,
                          const Format& in_fmt, const Format& acc_fmt);

/// y = a x with each multiply-accumulate rounded in fmt (inputs rounded too).
Vector matvec_emulated(const DenseMatrix& a, std::span<const double> x, const Format& fmt);

struct LuFactors {
  /// Row i of P*A is row perm[i] of A.
  std::vector<std::size_t> perm;
  DenseMatrix l;  // unit lower triangular
  DenseMatrix u;  // upper triangular
  Format fmt;
};

/// Right-looking LU with partial pivoting, all arithmetic in fmt. Ties in
/// the pivot search go to the smallest row index.
/// Throws Error(exact_zero_pivot) or Error(overflow_in_factor).
LuFactors lu_emulated(const DenseMatrix& a, const Format& fmt);

/// P*v
Vector apply_permutation(std::span<const std::size_t> perm, std::span<const double> v);

enum class Triangle { lower, upper };

/// Solves t x = b (or t^T x = b when `transposed`) by substitution in fmt.
/// `side` names the triangle stored in t. Throws Error(zero_diagonal).
Vector tri_solve_emulated(const DenseMatrix& t, std::span<const double> b, Triangle side,
                          bool unit_diag, const Format& fmt, bool transposed = false);

/// x with L U x = P b, both substitutions in fmt.
Vector lu_solve(const LuFactors& f, std::span<const double> b, const Format& fmt);

/// Upper triangular r with r^T r ~ a, arithmetic in fmt. The input is
/// symmetrized in binary64 and rounded to fmt first.
/// Throws Error(not_positive_definite) with the 0-based failing pivot.
DenseMatrix chol_emulated(const DenseMatrix& a, const Format& fmt);

struct Equilibration {
  Vector r_scale;
  Vector s_scale;
};

/// One row pass then one column pass in binary64. Every column of
/// diag(r) a diag(s) has max modulus exactly 1 and every row at most 1.
/// Throws Error(zero_row_or_column).
Equilibration equilibrate(const DenseMatrix& a);

struct ScaledHalf {
  DenseMatrix a_h;  // round(mu * R a S, fmt)
  double mu = 1.0;
  Vector r_scale;
  Vector s_scale;
  Format fmt;
};

/// Two-sided scaling then rounding: beta = max |R a S|, mu = theta x_max/beta.
/// Throws Error(zero_matrix) if beta == 0, Error(invalid_argument) unless
/// 0 < theta <= 1.
ScaledHalf scale_round(const DenseMatrix& a, std::span<const double> r_scale,
                       std::span<const double> s_scale, double theta, const Format& fmt);

struct CholHalfResult {
  DenseMatrix r_factor;  // r^T r ~ round(mu * G, fmt)
  Vector d_scale;        // sqrt(a_ii)
  double mu = 1.0;
  long c_final = 0;
  int doublings = 0;
  Format fmt;
};

inline constexpr int kCholHalfMaxDoublings = 20;

/// Shifted low-precision Cholesky: H = D^-1 A D^-1 with unit diagonal,
/// G = H + c u I, A_h = round(theta x_max / (1 + c u) * G). The shift c
/// starts at c0 and doubles after each failed attempt.
/// Throws Error(nonpositive_diagonal) or Error(retry_cap_exceeded).
CholHalfResult chol_half(const DenseMatrix& a, double theta, long c0, const Format& fmt,
                         int max_doublings = kCholHalfMaxDoublings);

}  // namespace mplab
