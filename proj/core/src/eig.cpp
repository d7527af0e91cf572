#include "mplab/eig.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mplab/error.hpp"

namespace mplab {

namespace {

double off_diagonal(const DenseMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// X^T Y in binary64.
DenseMatrix gram(const DenseMatrix& x, const DenseMatrix& y) {
  return matmul(x.transpose(), y);
}

}  // namespace

EigenPairs jacobi_eig(const DenseMatrix& a, const Format& fmt, double tol) {
  if (!a.square()) throw Error(ErrorCode::dimension_mismatch, "jacobi_eig: matrix not square");
  const std::size_t n = a.rows();
  const Arith ar(fmt);
  DenseMatrix w = round_matrix(a, fmt);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) w(j, i) = w(i, j);
  DenseMatrix v = DenseMatrix::identity(n);
  const double target = tol * norm_fro(w);

  int sweep = 0;
  while (off_diagonal(w) > target) {
    if (sweep++ == kJacobiMaxSweeps) {
      throw Error(ErrorCode::no_convergence,
                  "jacobi_eig: no convergence in " + std::to_string(kJacobiMaxSweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = w(p, q);
        if (apq == 0.0) continue;
        const double tau = ar.div(ar.sub(w(q, q), w(p, p)), ar.mul(2.0, apq));
        const double root = ar.sqrt(ar.add(1.0, ar.mul(tau, tau)));
        double t = ar.div(1.0, ar.add(std::fabs(tau), root));
        if (tau < 0.0) t = -t;
        const double c = ar.div(1.0, ar.sqrt(ar.add(1.0, ar.mul(t, t))));
        const double s = ar.mul(t, c);
        w(p, p) = ar.sub(w(p, p), ar.mul(t, apq));
        w(q, q) = ar.add(w(q, q), ar.mul(t, apq));
        w(p, q) = w(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != p && k != q) {
            const double akp = w(k, p);
            const double akq = w(k, q);
            w(k, p) = w(p, k) = ar.sub(ar.mul(c, akp), ar.mul(s, akq));
            w(k, q) = w(q, k) = ar.add(ar.mul(s, akp), ar.mul(c, akq));
          }
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = ar.sub(ar.mul(c, vkp), ar.mul(s, vkq));
          v(k, q) = ar.add(ar.mul(s, vkp), ar.mul(c, vkq));
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return w(i, i) < w(j, j); });
  EigenPairs out{DenseMatrix(n, n), Vector(n), fmt};
  for (std::size_t k = 0; k < n; ++k) {
    out.lambda[k] = w(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.x(i, k) = v(i, order[k]);
  }
  return out;
}

double norm2_symmetric(const DenseMatrix& a, int iters) {
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;
  // Fixed, non-symmetric start so no eigenvector is missed by construction.
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double nx = norm2(x);
    if (nx == 0.0) return 0.0;
    for (double& v : x) v /= nx;
    Vector y = matvec(a, x);
    const double ny = norm2(y);
    if (std::fabs(ny - est) <= 1e-15 * ny) {
      est = ny;
      break;
    }
    est = ny;
    x = std::move(y);
  }
  return est;
}

Vector eigen_residuals(const DenseMatrix& a, const EigenPairs& pairs, double a_norm2) {
  const double an = a_norm2 >= 0.0 ? a_norm2 : norm2_symmetric(a);
  const std::size_t n = a.rows();
  Vector res(pairs.x.cols());
  const DenseMatrix ax = matmul(a, pairs.x);
  for (std::size_t k = 0; k < pairs.x.cols(); ++k) {
    double rr = 0.0, xx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = ax(i, k) - pairs.lambda[k] * pairs.x(i, k);
      rr += d * d;
      xx += pairs.x(i, k) * pairs.x(i, k);
    }
    const double den = an * std::sqrt(xx);
    res[k] = den == 0.0 ? 0.0 : std::sqrt(rr) / den;
  }
  return res;
}

RefineResult refine_syev(const DenseMatrix& a, const EigenPairs& pairs, NormChoice norms) {
  const std::size_t n = a.rows();
  const std::size_t l = pairs.x.cols();
  if (!a.square() || pairs.x.rows() != n || l == 0 || l > n) {
    throw Error(ErrorCode::dimension_mismatch, "refine_syev: shapes do not match");
  }
  const DenseMatrix& x = pairs.x;
  DenseMatrix r = gram(x, x);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < l; ++j) r(i, j) = (i == j ? 1.0 : 0.0) - r(i, j);
  const DenseMatrix ax = matmul(a, x);
  const DenseMatrix s = gram(x, ax);

  Vector lam(l);
  for (std::size_t i = 0; i < l; ++i) lam[i] = s(i, i) / (1.0 - r(i, i));

  DenseMatrix sd = s;
  for (std::size_t i = 0; i < l; ++i) sd(i, i) -= lam[i];
  const double a_norm2 = norm2_symmetric(a);
  double omega = 0.0;
  if (norms == NormChoice::frobenius) {
    omega = 2.0 * (norm_fro(sd) + norm_fro(a) * norm_fro(r));
  } else {
    omega = 2.0 * (norm2_symmetric(sd) + a_norm2 * norm2_symmetric(r));
  }

  DenseMatrix e(l, l);
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      const double gap = lam[j] - lam[i];
      e(i, j) = std::fabs(gap) > omega ? (s(i, j) + lam[j] * r(i, j)) / gap : 0.5 * r(i, j);
    }
  }

  RefineResult out;
  out.pairs.fmt = fp64;
  out.pairs.x = matmul(x, e);
  for (std::size_t k = 0; k < out.pairs.x.data().size(); ++k) out.pairs.x.data()[k] += x.data()[k];
  out.pairs.lambda = lam;

  // Residuals of the new vectors against their Rayleigh quotients.
  EigenPairs rq = out.pairs;
  const DenseMatrix axn = matmul(a, rq.x);
  for (std::size_t k = 0; k < l; ++k) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += rq.x(i, k) * axn(i, k);
      den += rq.x(i, k) * rq.x(i, k);
    }
    rq.lambda[k] = num / den;
  }
  out.step.residuals = eigen_residuals(a, rq, a_norm2);
  out.step.e = std::move(e);
  out.step.omega = omega;
  out.step.partial_spectrum = l < n;
  return out;
}

SiceResult sice_refine(const DenseMatrix& a, std::span<const double> x0, double lambda0,
                       std::size_t max_iters) {
  const std::size_t n = a.rows();
  if (!a.square() || x0.size() != n) {
    throw Error(ErrorCode::dimension_mismatch, "sice_refine: shapes do not match");
  }
  SiceResult res;
  std::size_t s = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::fabs(x0[i]) > std::fabs(x0[s])) s = i;
  if (n == 0 || x0[s] == 0.0) throw Error(ErrorCode::invalid_argument, "sice_refine: x0 is zero");
  res.s = s;
  res.x.assign(x0.begin(), x0.end());
  const double m = x0[s];
  for (double& v : res.x) v /= m;
  res.x[s] = 1.0;
  res.lambda = lambda0;

  double prev_ys = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    // B = A - lambda I with column s replaced by -x; rhs = lambda x - A x.
    DenseMatrix b = a;
    for (std::size_t i = 0; i < n; ++i) b(i, i) -= res.lambda;
    for (std::size_t i = 0; i < n; ++i) b(i, s) = -res.x[i];
    const Vector ax = matvec(a, res.x);
    Vector rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = res.lambda * res.x[i] - ax[i];

    Vector y;
    try {
      const LuFactors f = lu_emulated(b, fp64);
      double umax = 0.0, umin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        umax = std::max(umax, std::fabs(f.u(i, i)));
        umin = std::min(umin, std::fabs(f.u(i, i)));
      }
      if (umin <= static_cast<double>(n) * fp64.unit_roundoff() * umax) {
        throw Error(ErrorCode::exact_zero_pivot, "pivot below n u max|u_ii|");
      }
      y = lu_solve(f, rhs, fp64);
    } catch (const Error& e) {
      throw Error(ErrorCode::singular_b, std::string("sice_refine: singular system: ") + e.what(),
                  it);
    }
    if (!std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); })) {
      throw Error(ErrorCode::singular_b, "sice_refine: non-finite correction", it);
    }
    const double ys = y[s];
    res.lambda += ys;
    for (std::size_t i = 0; i < n; ++i)
      if (i != s) res.x[i] += y[i];
    res.iters = it + 1;
    const bool zero = std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; });
    if (zero || (it > 0 && std::fabs(2.0 * ys) > std::fabs(prev_ys))) break;
    prev_ys = ys;
  }
  EigenPairs p{DenseMatrix(n, 1), Vector{res.lambda}, fp64};
  for (std::size_t i = 0; i < n; ++i) p.x(i, 0) = res.x[i];
  res.residual = eigen_residuals(a, p)[0];
  res.converged = res.residual <= 100.0 * static_cast<double>(n) * fp64.unit_roundoff();
  return res;
}

}  // namespace mplab
