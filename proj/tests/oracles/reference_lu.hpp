#pragma once
// Textbook right-looking LU and Cholesky in plain binary64.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

struct RefLu {
  std::vector<std::size_t> perm;
  std::vector<double> lu;  // row-major, unit L below the diagonal
  std::size_t n = 0;
};

inline RefLu reference_lu(std::vector<double> a, std::size_t n) {
  RefLu f;
  f.n = n;
  f.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i * n + k]) > std::abs(a[p * n + k])) p = i;
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
      std::swap(f.perm[k], f.perm[p]);
    }
    if (a[k * n + k] == 0.0) throw std::runtime_error("zero pivot");
    for (std::size_t i = k + 1; i < n; ++i) {
      a[i * n + k] /= a[k * n + k];
      for (std::size_t j = k + 1; j < n; ++j) a[i * n + j] -= a[i * n + k] * a[k * n + j];
    }
  }
  f.lu = std::move(a);
  return f;
}

// Upper r with r^T r = a (row-oriented, inner products left to right).
inline std::vector<double> reference_chol(const std::vector<double>& a, std::size_t n) {
  std::vector<double> r(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = a[i * n + i];
    for (std::size_t k = 0; k < i; ++k) d -= r[k * n + i] * r[k * n + i];
    if (!(d > 0.0)) throw std::runtime_error("not positive definite");
    r[i * n + i] = std::sqrt(d);
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < i; ++k) s -= r[k * n + i] * r[k * n + j];
      r[i * n + j] = s / r[i * n + i];
    }
  }
  return r;
}

}  // namespace oracle
