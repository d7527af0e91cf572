#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mplab/error.hpp"
#include "mplab/refine.hpp"
#include "refine_detail.hpp"

namespace mplab {

double normal_equations_backward_error(const DenseMatrix& a, std::span<const double> x,
                                       std::span<const double> b) {
  if (x.size() != a.cols() || b.size() != a.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "normal_equations_backward_error: size mismatch");
  }
  const Vector r = detail::residual(a, x, b, fp64);
  const double num = norm_inf(matvec_transposed(a, r));
  const DenseMatrix ata = matmul(a.transpose(), a);
  const double den = norm_inf(ata) * norm_inf(x) + norm_inf(matvec_transposed(a, b));
  if (den == 0.0) return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return num / den;
}

LsqResult lsq_gmres_ir(const DenseMatrix& a, std::span<const double> b, const IrConfig& cfg,
                       double theta, long c0) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n || n == 0) throw Error(ErrorCode::dimension_mismatch, "lsq_gmres_ir: need m >= n >= 1");
  if (b.size() != m) throw Error(ErrorCode::dimension_mismatch, "lsq_gmres_ir: size of b");
  if (!(theta > 0.0 && theta < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "lsq_gmres_ir: theta must lie in (0, 1)");
  }
  if (c0 < 1) throw Error(ErrorCode::invalid_argument, "lsq_gmres_ir: c0 must be >= 1");
  cfg.validate();
  const Format& fact = cfg.fact_fmt;
  const Format& work = cfg.work_fmt;
  const double tol = cfg.tol > 0.0 ? cfg.tol : detail::default_tol(n, work);
  GmresOptions opt = cfg.inner.value_or(GmresOptions{});
  double inner_tol = opt.inner_tol;
  if (inner_tol == 0.0) {
    inner_tol = fact.sig_bits <= 10 ? 1e-4 : fact.sig_bits <= 23 ? 1e-8 : 1e-12;
  }
  const std::size_t inner_maxit = opt.inner_maxit > 0 ? opt.inner_maxit : std::min<std::size_t>(n, 100);

  // S = diag(1 / ||a_j||_2), B = A S.
  Vector s(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) s[j] += a(i, j) * a(i, j);
  for (std::size_t j = 0; j < n; ++j) {
    if (s[j] == 0.0) {
      throw Error(ErrorCode::zero_row_or_column, "lsq_gmres_ir: zero column " + std::to_string(j), j);
    }
    s[j] = 1.0 / std::sqrt(s[j]);
  }
  const double mu = theta * fact.x_max();
  const double root_mu = std::sqrt(mu);
  DenseMatrix bh(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) bh(i, j) = round_value(root_mu * a(i, j) * s[j], fact);
  const DenseMatrix c = gemm_emulated(bh.transpose(), bh, DenseMatrix(n, n), 1.0, 0.0, fact, fact);

  // Shifted Cholesky C + c u_h diag(c_ii) = R^T R, doubling c on failure.
  const Arith fa(fact);
  DenseMatrix r_factor;
  long shift = c0;
  bool ok = false;
  for (int attempt = 0; attempt <= kCholHalfMaxDoublings; ++attempt, shift *= 2) {
    DenseMatrix g = c;
    const double cu = fa.round(static_cast<double>(shift) * fact.unit_roundoff());
    for (std::size_t j = 0; j < n; ++j) g(j, j) = fa.add(c(j, j), fa.mul(cu, c(j, j)));
    try {
      r_factor = chol_emulated(g, fact);
      ok = true;
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::not_positive_definite) throw;
    }
  }
  if (!ok) {
    throw Error(ErrorCode::rank_deficient,
                "lsq_gmres_ir: shifted Cholesky failed after " +
                    std::to_string(kCholHalfMaxDoublings) + " doublings");
  }

  LsqResult res;
  IrReport& rep = res.report;
  rep.shift_c = shift;
  rep.scaled = true;

  // M v = mu S R^{-1} R^{-T} S v. mu is folded into the outer scaling.
  Vector mu_s(n);
  for (std::size_t j = 0; j < n; ++j) mu_s[j] = mu * s[j];
  std::size_t flops = 0;
  auto apply_m = [&](std::span<const double> v, const Format& fmt) {
    Vector t(n);
    for (std::size_t j = 0; j < n; ++j) t[j] = s[j] * v[j];
    flops += n;
    double sigma = 1.0;
    if (finer_than(fp64, fmt) || !fmt.subnormals) {
      sigma = detail::pow2_scale(t);
      for (double& x : t) x /= sigma;
    }
    t = tri_solve_emulated(r_factor, t, Triangle::upper, false, fmt, true);
    t = tri_solve_emulated(r_factor, t, Triangle::upper, false, fmt);
    rep.tri_solves += 2;
    flops += 2 * n * n;
    for (std::size_t j = 0; j < n; ++j) t[j] = mu_s[j] * (t[j] * sigma);
    flops += n;
    return t;
  };
  // A^T (A y) in resid_fmt, never forming A^T A.
  const Arith ra(cfg.resid_fmt);
  const DenseMatrix at = a.transpose();
  auto apply_ata = [&](std::span<const double> y) {
    Vector ay(m), out(n);
    const Vector yr = round_vector(y, cfg.resid_fmt);
    for (std::size_t i = 0; i < m; ++i) ay[i] = ra.dot(a.row(i), yr);
    for (std::size_t j = 0; j < n; ++j) out[j] = ra.dot(at.row(j), ay);
    flops += 4 * m * n;
    return round_vector(out, work);
  };

  const Vector atb = matvec_transposed(a, b);
  res.x = round_vector(apply_m(atb, fact), work);
  auto record = [&] {
    const double be = normal_equations_backward_error(a, res.x, b);
    rep.backward_errors.push_back(be);
    return be;
  };
  double be = record();
  detail::OuterMonitor mon(be);

  const Format tri_fmt = opt.tri_solves_in_fact_fmt ? fact : work;
  const LinearOperator op = [&](std::span<const double> v) { return apply_ata(v); };
  const LinearOperator pre = [&](std::span<const double> v) {
    return round_vector(apply_m(v, tri_fmt), work);
  };
  const Arith upd(work);
  {
    // Cost of one M A^T A product, measured on a probe vector.
    const std::size_t before = flops;
    Vector probe(n, 0.0);
    probe[0] = 1.0;
    (void)pre(op(probe));
    res.flops_per_apply = flops - before;
    rep.tri_solves -= 2;
  }
  while (!(be <= tol) && rep.iterations < cfg.max_iters) {
    // r_i = A^T (b - A x_i) in resid_fmt.
    const Vector rb = detail::residual(a, res.x, b, cfg.resid_fmt);
    const Vector rbr = round_vector(rb, cfg.resid_fmt);
    Vector ri(n);
    for (std::size_t j = 0; j < n; ++j) ri[j] = ra.dot(at.row(j), rbr);
    ri = round_vector(ri, work);
    const GmresResult g = gmres(op, pre, ri, inner_tol, inner_maxit, work, opt.restart);
    rep.inner_iterations.push_back(g.iterations);
    for (std::size_t j = 0; j < n; ++j) res.x[j] = upd.add(res.x[j], g.z[j]);
    ++rep.iterations;
    be = record();
    if (mon.diverged(be)) {
      rep.status = IrStatus::diverged;
      rep.events.push_back("diverged at iteration " + std::to_string(rep.iterations));
      break;
    }
  }
  rep.converged = be <= tol;
  if (rep.converged) rep.status = IrStatus::converged;
  return res;
}

}  // namespace mplab
