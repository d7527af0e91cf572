#include "mplab/generate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "mplab/error.hpp"

namespace mplab {

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::uniform:
      return "uniform";
    case Family::randsvd:
      return "randsvd";
    case Family::laplacian2d:
      return "laplacian2d";
    case Family::spd_shifted:
      return "spd-shifted";
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return c == '_' ? '-' : static_cast<char>(std::tolower(c));
  });
  for (Family f : {Family::uniform, Family::randsvd, Family::laplacian2d, Family::spd_shifted}) {
    if (s == to_string(f)) return f;
  }
  return std::nullopt;
}

void MatrixGenerator::validate() const {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "generator: n must be >= 1");
  if (!(kappa >= 1.0)) throw Error(ErrorCode::invalid_argument, "generator: kappa must be >= 1");
  if (!(density > 0.0 && density <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "generator: density must lie in (0, 1]");
  }
  if (m != 0 && m < n && family == Family::randsvd) {
    throw Error(ErrorCode::invalid_argument, "generator: randsvd needs m >= n");
  }
}

DenseMatrix uniform_matrix(std::size_t m, std::size_t n, Rng& rng) {
  DenseMatrix a(m, n);
  for (double& v : a.data()) v = rng.uniform(-1.0, 1.0);
  return a;
}

DenseMatrix random_orthonormal(std::size_t m, std::size_t n, Rng& rng) {
  if (n > m) throw Error(ErrorCode::invalid_argument, "random_orthonormal: n > m");
  // Columns stored as rows of w for contiguous access.
  DenseMatrix w(n, m);
  for (double& v : w.data()) v = rng.normal();
  std::vector<Vector> house;
  Vector rdiag(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto col = w.row(k);
    double sigma = 0.0;
    for (std::size_t i = k; i < m; ++i) sigma += col[i] * col[i];
    sigma = std::sqrt(sigma);
    const double alpha = col[k] >= 0.0 ? -sigma : sigma;
    Vector v(m, 0.0);
    for (std::size_t i = k; i < m; ++i) v[i] = col[i];
    v[k] -= alpha;
    const double vn = norm2(v);
    if (vn > 0.0)
      for (double& x : v) x /= vn;
    // Apply H = I - 2 v v^T to the remaining columns.
    for (std::size_t j = k; j < n; ++j) {
      auto c = w.row(j);
      double d = 0.0;
      for (std::size_t i = k; i < m; ++i) d += v[i] * c[i];
      for (std::size_t i = k; i < m; ++i) c[i] -= 2.0 * d * v[i];
    }
    rdiag[k] = w(k, k);
    house.push_back(std::move(v));
  }
  // Q = H_0 ... H_{n-1} [I; 0], with column signs making diag(R) positive.
  DenseMatrix q(m, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector e(m, 0.0);
    e[j] = 1.0;
    for (std::size_t k = house.size(); k-- > 0;) {
      const Vector& v = house[k];
      double d = 0.0;
      for (std::size_t i = k; i < m; ++i) d += v[i] * e[i];
      for (std::size_t i = k; i < m; ++i) e[i] -= 2.0 * d * v[i];
    }
    const double sign = rdiag[j] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) q(i, j) = sign * e[i];
  }
  return q;
}

DenseMatrix randsvd(std::size_t m, std::size_t n, double kappa, Rng& rng) {
  const DenseMatrix u = random_orthonormal(m, n, rng);
  const DenseMatrix v = random_orthonormal(n, n, rng);
  Vector sigma(n, 1.0);
  for (std::size_t i = 0; i < n && n > 1; ++i) {
    sigma[i] = std::pow(kappa, -static_cast<double>(i) / static_cast<double>(n - 1));
  }
  DenseMatrix us = u;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) us(i, j) *= sigma[j];
  return matmul(us, v.transpose());
}

CsrMatrix laplacian2d(std::size_t side) {
  const std::size_t n = side * side;
  std::vector<Triplet> t;
  t.reserve(5 * n);
  for (std::size_t gy = 0; gy < side; ++gy) {
    for (std::size_t gx = 0; gx < side; ++gx) {
      const std::size_t i = gy * side + gx;
      if (gy > 0) t.push_back({i, i - side, -1.0});
      if (gx > 0) t.push_back({i, i - 1, -1.0});
      t.push_back({i, i, 4.0});
      if (gx + 1 < side) t.push_back({i, i + 1, -1.0});
      if (gy + 1 < side) t.push_back({i, i + side, -1.0});
    }
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

DenseMatrix spd_shifted(std::size_t n, Rng& rng, double density) {
  DenseMatrix m(n, n);
  for (double& v : m.data()) {
    const double x = rng.uniform(-1.0, 1.0);
    if (density >= 1.0 || rng.uniform() < density) v = x;
  }
  DenseMatrix a = matmul(m.transpose(), m);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  // matmul is not bitwise symmetric; take the upper triangle.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
  return a;
}

DenseMatrix random_symmetric(std::size_t n, Rng& rng) {
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.uniform(-1.0, 1.0);
  return a;
}

GeneratedMatrix generate(const MatrixGenerator& gen, Rng& rng) {
  gen.validate();
  const std::size_t m = gen.m ? gen.m : gen.n;
  switch (gen.family) {
    case Family::uniform:
      return uniform_matrix(m, gen.n, rng);
    case Family::randsvd:
      return randsvd(m, gen.n, gen.kappa, rng);
    case Family::laplacian2d:
      return laplacian2d(gen.n);
    case Family::spd_shifted:
      return spd_shifted(gen.n, rng, gen.density);
  }
  throw Error(ErrorCode::invalid_argument, "generate: unknown family");
}

}  // namespace mplab
