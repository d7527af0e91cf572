#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "mplab/error.hpp"
#include "mplab/sparse.hpp"

namespace mplab {

namespace {

constexpr Format kStorageLadder[] = {fp16, fp32, fp64};

std::optional<DenseMatrix> invert(const DenseMatrix& b) {
  const std::size_t n = b.rows();
  LuFactors f;
  try {
    f = lu_emulated(b, fp64);
  } catch (const Error&) {
    return std::nullopt;
  }
  DenseMatrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vector col;
    try {
      col = lu_solve(f, e, fp64);
    } catch (const Error&) {
      return std::nullopt;
    }
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  if (!all_finite(inv)) return std::nullopt;
  return inv;
}

double norm_one(const DenseMatrix& a) { return norm_inf(a.transpose()); }

bool symmetric(const DenseMatrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (a(i, j) != a(j, i)) return false;
  return true;
}

bool no_zero_rows(const DenseMatrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; })) return false;
  }
  return true;
}

bool qualifies(const DenseMatrix& b, const DenseMatrix& rounded, const Format& fmt,
               const BlockJacobiOptions& opt) {
  if (max_abs(b) > fmt.x_max() || !all_finite(rounded) || !no_zero_rows(rounded)) return false;
  if (opt.regularity == Regularity::frobenius) {
    DenseMatrix diff = rounded;
    for (std::size_t k = 0; k < diff.data().size(); ++k) diff.data()[k] -= b.data()[k];
    return norm_fro(diff) <= opt.digit_tau * norm_fro(b);
  }
  // Condition-number variant; b is itself an inverse, so kappa(b) = kappa(b^-1).
  const auto ri = invert(rounded);
  const auto bi = invert(b);
  if (!ri || !bi) return false;
  const double kr = norm_one(rounded) * norm_one(*ri);
  const double kb = norm_one(b) * norm_one(*bi);
  return kr <= (1.0 + opt.digit_tau) * kb;
}

}  // namespace

BlockJacobiPrecond block_jacobi_build(const CsrMatrix& a, const BlockJacobiOptions& opt) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "block_jacobi_build: matrix not square");
  }
  if (opt.block_size < 1 || opt.block_size > 32) {
    throw Error(ErrorCode::invalid_argument, "block_jacobi_build: block_size must lie in [1, 32]");
  }
  if (!(opt.digit_tau > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "block_jacobi_build: digit_tau must be > 0");
  }
  BlockJacobiPrecond p;
  p.n = a.rows();
  for (std::size_t s = 0; s < p.n; s += opt.block_size) p.block_starts.push_back(s);
  p.block_starts.push_back(p.n);

  const auto off = a.row_offsets();
  const auto col = a.col_indices();
  const auto val = a.values();
  for (std::size_t blk = 0; blk + 1 < p.block_starts.size(); ++blk) {
    const std::size_t s = p.block_starts[blk];
    const std::size_t e = p.block_starts[blk + 1];
    DenseMatrix d(e - s, e - s);
    for (std::size_t i = s; i < e; ++i)
      for (std::size_t k = off[i]; k < off[i + 1]; ++k)
        if (col[k] >= s && col[k] < e) d(i - s, col[k] - s) = val[k];

    std::optional<DenseMatrix> inv = invert(d);
    if (!inv) {
      p.inv_blocks.push_back(DenseMatrix::identity(e - s));
      p.block_fmt.push_back(opt.force_fmt.value_or(fp16));
      p.singular.push_back(true);
      continue;
    }
    if (symmetric(d)) {
      DenseMatrix& m = *inv;
      for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));
    }
    Format chosen = fp64;
    DenseMatrix stored = *inv;
    if (opt.force_fmt) {
      chosen = *opt.force_fmt;
      stored = round_matrix(*inv, chosen);
    } else {
      for (const Format& f : kStorageLadder) {
        DenseMatrix r = round_matrix(*inv, f);
        if (qualifies(*inv, r, f, opt)) {
          chosen = f;
          stored = std::move(r);
          break;
        }
      }
    }
    p.inv_blocks.push_back(std::move(stored));
    p.block_fmt.push_back(chosen);
    p.singular.push_back(false);
  }
  return p;
}

Vector block_jacobi_apply(const BlockJacobiPrecond& p, std::span<const double> v) {
  if (v.size() != p.n) throw Error(ErrorCode::dimension_mismatch, "block_jacobi_apply: size");
  Vector y(p.n, 0.0);
  for (std::size_t blk = 0; blk < p.blocks(); ++blk) {
    const std::size_t s = p.block_starts[blk];
    const DenseMatrix& b = p.inv_blocks[blk];
    for (std::size_t i = 0; i < b.rows(); ++i) {
      double acc = 0.0;
      const auto r = b.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) acc += r[j] * v[s + j];
      y[s + i] = acc;
    }
  }
  return y;
}

std::string_view to_string(PcgStatus s) noexcept {
  switch (s) {
    case PcgStatus::converged:
      return "converged";
    case PcgStatus::not_converged:
      return "not_converged";
    case PcgStatus::indefinite:
      return "indefinite";
  }
  return "unknown";
}

PcgResult pcg(const CsrMatrix& a, std::span<const double> b, const BlockJacobiPrecond* precond,
              double tol, std::size_t maxit) {
  if (a.rows() != a.cols() || b.size() != a.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "pcg: size mismatch");
  }
  if (precond && precond->n != a.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "pcg: preconditioner size");
  }
  const std::size_t n = a.rows();
  auto dot = [n](std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
  };
  auto apply_m = [&](const Vector& r) { return precond ? block_jacobi_apply(*precond, r) : r; };

  PcgResult res;
  res.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  res.res_history.push_back(bnorm == 0.0 ? 0.0 : 1.0);
  if (bnorm == 0.0) {
    res.status = PcgStatus::converged;
    return res;
  }
  Vector r(b.begin(), b.end());
  Vector z = apply_m(r);
  Vector p = z;
  double rz = dot(r, z);
  while (res.iterations < maxit) {
    const Vector q = spmv(a, p);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) {
      res.status = PcgStatus::indefinite;
      return res;
    }
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    ++res.iterations;
    const double rel = norm2(r) / bnorm;
    res.res_history.push_back(rel);
    if (rel <= tol) {
      res.status = PcgStatus::converged;
      return res;
    }
    z = apply_m(r);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  res.status = PcgStatus::not_converged;
  return res;
}

}  // namespace mplab
