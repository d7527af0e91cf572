#include "mplab/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "mplab/error.hpp"

namespace mplab {

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw Error(ErrorCode::dimension_mismatch, "ragged initializer list");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
  DenseMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Vector DenseMatrix::column(std::size_t j) const {
  Vector c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double norm_inf(const DenseMatrix& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += std::fabs(v);
    best = std::max(best, s);
  }
  return best;
}

double norm_inf(std::span<const double> v) {
  double best = 0.0;
  for (double x : v) best = std::max(best, std::fabs(x));
  return best;
}

double norm_fro(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double max_abs(const DenseMatrix& a) { return norm_inf(a.data()); }

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw Error(ErrorCode::dimension_mismatch, "matvec: size mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "matvec_transposed: size mismatch");
  }
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * x[i];
  }
  return y;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::dimension_mismatch, "matmul: size mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

DenseMatrix round_matrix(const DenseMatrix& a, const Format& fmt, Rng* rng) {
  DenseMatrix out(a.rows(), a.cols());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = round_value(src[k], fmt, rng);
  return out;
}

bool all_representable(const DenseMatrix& a, const Format& fmt) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [&](double v) { return representable(v, fmt); });
}

bool all_finite(const DenseMatrix& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double v) { return std::isfinite(v); });
}

DenseMatrix gemm_emulated(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c,
                          double alpha, double beta, const Format& in_fmt,
                          const Format& acc_fmt) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "gemm_emulated: nonconformal operands");
  }
  const Arith acc(acc_fmt);
  const DenseMatrix ar = round_matrix(a, in_fmt);
  const DenseMatrix bt = round_matrix(b, in_fmt).transpose();
  const double alpha_r = acc.round(alpha);
  const double beta_r = acc.round(beta);
  const bool plain = alpha == 1.0 && beta == 0.0;

  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      const double s = acc.dot(ar.row(i), bt.row(j));
      if (plain) {
        out(i, j) = s;
      } else {
        const double cij = acc.round(c(i, j));
        out(i, j) = acc.add(acc.mul(alpha_r, s), acc.mul(beta_r, cij));
      }
    }
  }
  return out;
}

Vector matvec_emulated(const DenseMatrix& a, std::span<const double> x, const Format& fmt) {
  if (x.size() != a.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "matvec_emulated: size mismatch");
  }
  const Arith ar(fmt);
  if (ar.exact()) return matvec(a, x);
  const Vector xr = round_vector(x, fmt);
  Vector y(a.rows());
  Vector row_r(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) row_r[j] = ar.round(r[j]);
    y[i] = ar.dot(row_r, xr);
  }
  return y;
}

LuFactors lu_emulated(const DenseMatrix& a, const Format& fmt) {
  if (!a.square()) throw Error(ErrorCode::dimension_mismatch, "lu_emulated: matrix not square");
  const Arith ar(fmt);
  const std::size_t n = a.rows();
  DenseMatrix w = round_matrix(a, fmt);
  if (!all_finite(w)) {
    throw Error(ErrorCode::overflow_in_factor,
                "lu_emulated: input overflows " + format_name(fmt) + "; scale first");
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(w(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::fabs(w(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best == 0.0) {
      throw Error(ErrorCode::exact_zero_pivot,
                  "lu_emulated: zero pivot column " + std::to_string(k), k);
    }
    if (p != k) {
      std::swap_ranges(w.row(k).begin(), w.row(k).end(), w.row(p).begin());
      std::swap(perm[k], perm[p]);
    }
    const double pivot = w(k, k);
    const auto urow = w.row(k);
    bool finite = true;
    for (std::size_t i = k + 1; i < n; ++i) {
      auto wi = w.row(i);
      const double l = ar.div(wi[k], pivot);
      wi[k] = l;
      finite = finite && std::isfinite(l);
      if (l == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) {
        const double v = ar.sub(wi[j], ar.mul(l, urow[j]));
        wi[j] = v;
        finite = finite && std::isfinite(v);
      }
    }
    if (!finite) {
      throw Error(ErrorCode::overflow_in_factor,
                  "lu_emulated: overflow at step " + std::to_string(k), k);
    }
  }

  LuFactors f{std::move(perm), DenseMatrix(n, n), DenseMatrix(n, n), fmt};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j < i) {
        f.l(i, j) = w(i, j);
      } else {
        f.u(i, j) = w(i, j);
      }
    }
    f.l(i, i) = 1.0;
  }
  return f;
}

Vector apply_permutation(std::span<const std::size_t> perm, std::span<const double> v) {
  Vector out(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[i] = v[perm[i]];
  return out;
}

Vector tri_solve_emulated(const DenseMatrix& t, std::span<const double> b, Triangle side,
                          bool unit_diag, const Format& fmt, bool transposed) {
  if (!t.square() || b.size() != t.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "tri_solve_emulated: size mismatch");
  }
  const Arith ar(fmt);
  const std::size_t n = t.rows();
  Vector x = round_vector(b, fmt);
  // Solving with the transpose of an upper factor is a forward sweep.
  const bool forward = (side == Triangle::lower) != transposed;
  auto entry = [&](std::size_t i, std::size_t j) { return transposed ? t(j, i) : t(i, j); };

  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = forward ? step : n - 1 - step;
    double acc = x[i];
    if (forward) {
      for (std::size_t j = 0; j < i; ++j) acc = ar.sub(acc, ar.mul(entry(i, j), x[j]));
    } else {
      for (std::size_t j = i + 1; j < n; ++j) acc = ar.sub(acc, ar.mul(entry(i, j), x[j]));
    }
    if (!unit_diag) {
      const double d = entry(i, i);
      if (d == 0.0) {
        throw Error(ErrorCode::zero_diagonal,
                    "tri_solve_emulated: zero diagonal at " + std::to_string(i), i);
      }
      acc = ar.div(acc, d);
    }
    x[i] = acc;
  }
  return x;
}

Vector lu_solve(const LuFactors& f, std::span<const double> b, const Format& fmt) {
  const Vector pb = apply_permutation(f.perm, b);
  const Vector y = tri_solve_emulated(f.l, pb, Triangle::lower, true, fmt);
  return tri_solve_emulated(f.u, y, Triangle::upper, false, fmt);
}

namespace {

// Upper Cholesky of an already rounded symmetric matrix; returns the
// failing pivot index instead of throwing.
std::optional<std::size_t> chol_in_place(DenseMatrix& w, const Arith& ar) {
  const std::size_t n = w.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = w(j, j);
    for (std::size_t k = 0; k < j; ++k) d = ar.sub(d, ar.mul(w(k, j), w(k, j)));
    if (!(d > 0.0) || !std::isfinite(d)) return j;
    const double rjj = ar.sqrt(d);
    w(j, j) = rjj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = w(j, i);
      for (std::size_t k = 0; k < j; ++k) s = ar.sub(s, ar.mul(w(k, j), w(k, i)));
      s = ar.div(s, rjj);
      if (!std::isfinite(s)) return j;
      w(j, i) = s;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) w(i, j) = 0.0;
  return std::nullopt;
}

DenseMatrix symmetrized(const DenseMatrix& a) {
  DenseMatrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

// Rounds mu * v to fmt without letting binary64 noise in mu * v push a value
// meant to sit at theta * x_max <= x_max past the overflow threshold.
double round_scaled(double scaled, const Format& fmt) {
  const double xmax = fmt.x_max();
  if (std::fabs(scaled) > xmax) scaled = std::copysign(xmax, scaled);
  return round_value(scaled, fmt);
}

}  // namespace

DenseMatrix chol_emulated(const DenseMatrix& a, const Format& fmt) {
  if (!a.square()) throw Error(ErrorCode::dimension_mismatch, "chol_emulated: not square");
  DenseMatrix w = round_matrix(symmetrized(a), fmt);
  const Arith ar(fmt);
  if (auto bad = chol_in_place(w, ar)) {
    throw Error(ErrorCode::not_positive_definite,
                "chol_emulated: nonpositive pivot at " + std::to_string(*bad), *bad);
  }
  return w;
}

Equilibration equilibrate(const DenseMatrix& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Equilibration e{Vector(m), Vector(n, 0.0)};
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = norm_inf(a.row(i));
    if (mx == 0.0) {
      throw Error(ErrorCode::zero_row_or_column, "equilibrate: zero row " + std::to_string(i), i);
    }
    e.r_scale[i] = 1.0 / mx;
  }
  Vector colmax(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      colmax[j] = std::max(colmax[j], std::fabs(e.r_scale[i] * a(i, j)));
  for (std::size_t j = 0; j < n; ++j) {
    if (colmax[j] == 0.0) {
      throw Error(ErrorCode::zero_row_or_column,
                  "equilibrate: zero column " + std::to_string(j), j);
    }
    e.s_scale[j] = 1.0 / colmax[j];
  }
  return e;
}

ScaledHalf scale_round(const DenseMatrix& a, std::span<const double> r_scale,
                       std::span<const double> s_scale, double theta, const Format& fmt) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "scale_round: theta must lie in (0, 1]");
  }
  if (r_scale.size() != a.rows() || s_scale.size() != a.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "scale_round: scaling vector size");
  }
  DenseMatrix ras(a.rows(), a.cols());
  double beta = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double v = (r_scale[i] * a(i, j)) * s_scale[j];
      ras(i, j) = v;
      beta = std::max(beta, std::fabs(v));
    }
  }
  if (beta == 0.0) throw Error(ErrorCode::zero_matrix, "scale_round: zero matrix");
  ScaledHalf out;
  out.mu = theta * fmt.x_max() / beta;
  out.a_h = DenseMatrix(a.rows(), a.cols());
  for (std::size_t k = 0; k < ras.data().size(); ++k) {
    out.a_h.data()[k] = round_scaled(out.mu * ras.data()[k], fmt);
  }
  out.r_scale.assign(r_scale.begin(), r_scale.end());
  out.s_scale.assign(s_scale.begin(), s_scale.end());
  out.fmt = fmt;
  return out;
}

CholHalfResult chol_half(const DenseMatrix& a, double theta, long c0, const Format& fmt,
                         int max_doublings) {
  if (!a.square()) throw Error(ErrorCode::dimension_mismatch, "chol_half: not square");
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "chol_half: theta must lie in (0, 1]");
  }
  if (c0 < 1) throw Error(ErrorCode::invalid_argument, "chol_half: c0 must be >= 1");
  const std::size_t n = a.rows();
  Vector d(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a(i, i) > 0.0)) {
      throw Error(ErrorCode::nonpositive_diagonal,
                  "chol_half: nonpositive diagonal at " + std::to_string(i), i);
    }
    d[i] = std::sqrt(a(i, i));
  }
  DenseMatrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    h(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i)) / (d[i] * d[j]);
      h(i, j) = v;
      h(j, i) = v;
    }
  }

  const double u = fmt.unit_roundoff();
  const Arith ar(fmt);
  long c = c0;
  for (int attempt = 0; attempt <= max_doublings; ++attempt, c *= 2) {
    const double shift = static_cast<double>(c) * u;
    const double beta = 1.0 + shift;
    const double mu = theta * fmt.x_max() / beta;
    DenseMatrix w(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = h(i, j) + (i == j ? shift : 0.0);
        w(i, j) = round_scaled(mu * g, fmt);
      }
    }
    if (!chol_in_place(w, ar)) {
      return CholHalfResult{std::move(w), std::move(d), mu, c, attempt, fmt};
    }
  }
  throw Error(ErrorCode::retry_cap_exceeded,
              "chol_half: Cholesky still failing after " + std::to_string(max_doublings) +
                  " shift doublings");
}

}  // namespace mplab
