#pragma once
//
// LU factorization with partial pivoting carried out in 32-bit fixed point,
// R(i) = i / 2^32.
//

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mplab/dense.hpp"

namespace mplab {

struct FixedPointMatrix {
  std::size_t n = 0;
  std::vector<std::int32_t> data;  // row-major
  double scale_m = 1.0;            // original value ~ scale_m * R(i)
  int range_r = 0;

  std::int32_t& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  std::int32_t operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

/// High word of the 64-bit product, (i * j) >> 32 rounded toward -inf.
constexpr std::int32_t mulhi32(std::int32_t i, std::int32_t j) noexcept {
  return static_cast<std::int32_t>((static_cast<std::int64_t>(i) * j) >> 32);
}

/// m = max|a| * 2^r, entries round((a / m) * 2^32) clamped to +-(2^31 - 1).
/// Throws Error(zero_matrix) or Error(invalid_argument) for r < 0.
FixedPointMatrix to_fixed(const DenseMatrix& a, int r);

/// How the low half of each rank-1 update product is discarded.
enum class ProductRounding {
  truncate,  // arithmetic shift, rounds toward -inf
  nearest,   // add half an ulp before shifting
};

struct QiluFactors {
  std::vector<std::size_t> perm;  // row i of P*A is row perm[i] of A
  DenseMatrix l;                  // unit lower, multipliers decoded from Q31
  DenseMatrix u;                  // upper, R(i) values
  double m = 1.0;                 // P (A / m) ~ L U
  FixedPointMatrix factors;       // packed integer factors (multipliers in Q31)
};

/// Integer LU with partial pivoting. Throws Error(overflowed) when an
/// update leaves int32 range and Error(zero_pivot) on a zero column.
QiluFactors qilu_factor(const DenseMatrix& a, int r,
                        ProductRounding rounding = ProductRounding::truncate);

/// Solves A x = b from qilu factors with binary64 substitutions.
Vector qilu_solve(const QiluFactors& f, std::span<const double> b);

}  // namespace mplab
