#include "mplab/qilu.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>

#include "mplab/error.hpp"

namespace mplab {

namespace {

constexpr std::int64_t kMax32 = std::numeric_limits<std::int32_t>::max();
constexpr std::int64_t kMin32 = std::numeric_limits<std::int32_t>::min();
constexpr double kTwo32 = 4294967296.0;
constexpr double kTwo31 = 2147483648.0;

bool fits32(std::int64_t v) { return v >= kMin32 && v <= kMax32; }

// The factorization proper. Only integer types cross this boundary.
void factor_integer(std::vector<std::int32_t>& w, std::size_t n, std::vector<std::size_t>& perm,
                    ProductRounding rounding) {
  auto at = [&](std::size_t i, std::size_t j) -> std::int32_t& { return w[i * n + j]; };
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    std::int64_t best = std::llabs(at(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const std::int64_t v = std::llabs(at(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best == 0) {
      throw Error(ErrorCode::zero_pivot, "qilu_factor: zero pivot column " + std::to_string(k), k);
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(at(k, j), at(p, j));
      std::swap(perm[k], perm[p]);
    }
    // Reciprocal of the pivot with 62 fractional bits; |alpha * a| <= 2^62
    // because |a| <= |pivot| in the pivot column.
    const std::int64_t pivot = at(k, k);
    const std::int64_t alpha = (std::int64_t{1} << 62) / pivot;
    for (std::size_t i = k + 1; i < n; ++i) {
      const std::int64_t scaled = alpha * at(i, k);
      std::int64_t l = rounding == ProductRounding::nearest
                           ? (scaled + (std::int64_t{1} << 30)) >> 31
                           : scaled >> 31;
      if (l > kMax32) l = kMax32;  // l == 1 exactly
      at(i, k) = static_cast<std::int32_t>(l);
      if (l == 0) continue;
      for (std::size_t j = k + 1; j < n; ++j) {
        const std::int64_t prod = l * at(k, j);
        const std::int64_t upd = rounding == ProductRounding::nearest
                                     ? (prod + (std::int64_t{1} << 30)) >> 31
                                     : prod >> 31;
        const std::int64_t v = std::int64_t{at(i, j)} - upd;
        if (!fits32(v)) {
          throw Error(ErrorCode::overflowed,
                      "qilu_factor: int32 overflow at step " + std::to_string(k), k);
        }
        at(i, j) = static_cast<std::int32_t>(v);
      }
    }
  }
}

}  // namespace

FixedPointMatrix to_fixed(const DenseMatrix& a, int r) {
  if (!a.square()) throw Error(ErrorCode::dimension_mismatch, "to_fixed: matrix not square");
  if (r < 0 || r > 31) throw Error(ErrorCode::invalid_argument, "to_fixed: r must lie in [0, 31]");
  const double amax = max_abs(a);
  if (amax == 0.0) throw Error(ErrorCode::zero_matrix, "to_fixed: zero matrix");
  if (!std::isfinite(amax)) throw Error(ErrorCode::invalid_argument, "to_fixed: non-finite entry");
  FixedPointMatrix f;
  f.n = a.rows();
  f.scale_m = std::ldexp(amax, r);
  f.range_r = r;
  f.data.resize(f.n * f.n);
  const auto src = a.data();
  for (std::size_t k = 0; k < src.size(); ++k) {
    double v = std::nearbyint(src[k] / f.scale_m * kTwo32);
    if (v > static_cast<double>(kMax32)) v = static_cast<double>(kMax32);
    if (v < -static_cast<double>(kMax32)) v = -static_cast<double>(kMax32);
    f.data[k] = static_cast<std::int32_t>(v);
  }
  return f;
}

QiluFactors qilu_factor(const DenseMatrix& a, int r, ProductRounding rounding) {
  FixedPointMatrix fx = to_fixed(a, r);
  const std::size_t n = fx.n;
  QiluFactors out;
  out.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.perm[i] = i;
  factor_integer(fx.data, n, out.perm, rounding);

  out.m = fx.scale_m;
  out.l = DenseMatrix(n, n);
  out.u = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j < i) {
        out.l(i, j) = static_cast<double>(fx(i, j)) / kTwo31;
      } else {
        out.u(i, j) = static_cast<double>(fx(i, j)) / kTwo32;
      }
    }
    out.l(i, i) = 1.0;
  }
  out.factors = std::move(fx);
  return out;
}

Vector qilu_solve(const QiluFactors& f, std::span<const double> b) {
  if (b.size() != f.u.rows()) throw Error(ErrorCode::dimension_mismatch, "qilu_solve: size");
  LuFactors lu{f.perm, f.l, f.u, fp64};
  Vector x = lu_solve(lu, b, fp64);
  for (double& v : x) v /= f.m;
  return x;
}

}  // namespace mplab
