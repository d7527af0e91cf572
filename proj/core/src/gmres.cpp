#include <algorithm>
#include <cmath>
#include <string>

#include "mplab/error.hpp"
#include "mplab/refine.hpp"
#include "refine_detail.hpp"

namespace mplab {

namespace {

struct Cycle {
  Vector z;
  std::size_t steps = 0;
  bool converged = false;
  bool breakdown = false;
  double basis_defect = 0.0;
};

// One Arnoldi cycle from a zero guess on M A z = M r. `scale` is the
// residual norm at the start of the whole solve so histories from several
// cycles share one normalization.
Cycle arnoldi_cycle(const LinearOperator& apply, std::span<const double> r0, double scale,
                    double tol, std::size_t steps_max, const Arith& ar,
                    std::vector<double>& history) {
  const std::size_t n = r0.size();
  Cycle out;
  out.z.assign(n, 0.0);
  const double beta = ar.nrm2(r0);
  if (beta == 0.0) {
    out.converged = true;
    return out;
  }

  std::vector<Vector> v;
  v.reserve(steps_max + 1);
  Vector v0(n);
  for (std::size_t i = 0; i < n; ++i) v0[i] = ar.div(r0[i], beta);
  v.push_back(std::move(v0));

  // Column k of the Hessenberg matrix, rotated in place.
  std::vector<Vector> h;
  Vector cs, sn;
  Vector g{beta};

  std::size_t k = 0;
  while (k < steps_max) {
    Vector w = apply(v[k]);
    Vector hk(k + 2, 0.0);
    for (std::size_t j = 0; j <= k; ++j) {
      hk[j] = ar.dot(w, v[j]);
      ar.axpy(-hk[j], v[j], w);
    }
    const double hnext = ar.nrm2(w);
    hk[k + 1] = hnext;

    for (std::size_t j = 0; j < k; ++j) {
      const double t = ar.add(ar.mul(cs[j], hk[j]), ar.mul(sn[j], hk[j + 1]));
      hk[j + 1] = ar.sub(ar.mul(cs[j], hk[j + 1]), ar.mul(sn[j], hk[j]));
      hk[j] = t;
    }
    const double a = hk[k];
    const double b = hk[k + 1];
    const double d = ar.sqrt(ar.add(ar.mul(a, a), ar.mul(b, b)));
    const double c = d == 0.0 ? 1.0 : ar.div(a, d);
    const double s = d == 0.0 ? 0.0 : ar.div(b, d);
    cs.push_back(c);
    sn.push_back(s);
    hk[k] = d;
    hk[k + 1] = 0.0;
    g.push_back(ar.mul(-s, g[k]));
    g[k] = ar.mul(c, g[k]);
    h.push_back(std::move(hk));
    ++k;

    const double rel = std::fabs(g[k]) / scale;
    history.push_back(rel);
    if (hnext == 0.0) {
      out.breakdown = true;
      out.converged = true;
      break;
    }
    if (rel <= tol) {
      out.converged = true;
      break;
    }
    Vector vn(n);
    for (std::size_t i = 0; i < n; ++i) vn[i] = ar.div(w[i], hnext);
    v.push_back(std::move(vn));
  }
  out.steps = k;

  // Back substitution on the rotated k x k triangle.
  Vector y(k, 0.0);
  for (std::size_t ii = k; ii-- > 0;) {
    double acc = g[ii];
    for (std::size_t j = ii + 1; j < k; ++j) acc = ar.sub(acc, ar.mul(h[j][ii], y[j]));
    y[ii] = h[ii][ii] == 0.0 ? 0.0 : ar.div(acc, h[ii][ii]);
  }
  for (std::size_t j = 0; j < k; ++j) ar.axpy(y[j], v[j], out.z);

  DenseMatrix basis(n, v.size());
  for (std::size_t j = 0; j < v.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) basis(i, j) = v[j][i];
  out.basis_defect = orthogonality_defect(basis);
  return out;
}

}  // namespace

GmresResult gmres(const LinearOperator& apply_op, const LinearOperator& precond,
                  std::span<const double> rhs, double tol, std::size_t maxit, const Format& fmt,
                  std::size_t restart) {
  if (!apply_op) throw Error(ErrorCode::invalid_argument, "gmres: empty operator");
  if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "gmres: tol must be > 0");
  const Arith ar(fmt);
  const std::size_t n = rhs.size();
  auto m_apply = [&](std::span<const double> v) {
    Vector w = apply_op(v);
    if (w.size() != n) throw Error(ErrorCode::dimension_mismatch, "gmres: operator size");
    if (precond) w = precond(w);
    return round_vector(w, fmt);
  };

  GmresResult res;
  res.z.assign(n, 0.0);
  Vector r = round_vector(precond ? precond(rhs) : Vector(rhs.begin(), rhs.end()), fmt);
  const double scale = ar.nrm2(r);
  res.res_history.push_back(1.0);
  if (scale == 0.0) {
    res.converged = true;
    return res;
  }
  const std::size_t cycle_len = restart > 0 ? restart : maxit;

  while (res.iterations < maxit) {
    const std::size_t steps = std::min(cycle_len, maxit - res.iterations);
    Cycle c = arnoldi_cycle(m_apply, r, scale, tol, steps, ar, res.res_history);
    for (std::size_t i = 0; i < n; ++i) res.z[i] = ar.add(res.z[i], c.z[i]);
    res.iterations += c.steps;
    res.basis_defect = c.basis_defect;
    if (c.converged) {
      res.converged = true;
      res.breakdown = c.breakdown;
      break;
    }
    if (c.steps == 0) break;
    // Restart: true preconditioned residual of the accumulated iterate.
    Vector az = apply_op(res.z);
    for (std::size_t i = 0; i < n; ++i) az[i] = ar.sub(ar.round(rhs[i]), ar.round(az[i]));
    r = round_vector(precond ? precond(az) : az, fmt);
  }
  return res;
}

IrResult gmres_ir_solve(const DenseMatrix& a, std::span<const double> b, const IrConfig& cfg,
                        std::span<const double> x_ref) {
  if (!a.square() || b.size() != a.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "gmres_ir_solve: size mismatch");
  }
  if (!cfg.inner) throw Error(ErrorCode::invalid_argument, "gmres_ir_solve: cfg.inner unset");
  cfg.validate();
  const std::size_t n = a.rows();
  const double tol = cfg.tol > 0.0 ? cfg.tol : detail::default_tol(n, cfg.work_fmt);
  const GmresOptions& opt = *cfg.inner;
  double inner_tol = opt.inner_tol;
  if (inner_tol == 0.0) {
    inner_tol = cfg.fact_fmt.sig_bits <= 10 ? 1e-4 : cfg.fact_fmt.sig_bits <= 23 ? 1e-8 : 1e-12;
  }
  const std::size_t inner_maxit = opt.inner_maxit > 0 ? opt.inner_maxit : std::min<std::size_t>(n, 100);

  const detail::PreparedLu p = detail::prepare_lu(a, cfg.fact_fmt, cfg.theta);
  IrResult res;
  IrReport& rep = res.report;
  rep.scaled = p.scaled;
  rep.rescales = p.rescales;
  if (p.rescales) rep.events.push_back("theta reduced to " + std::to_string(p.theta) + " after overflow");

  res.x = round_vector(detail::apply_lu_inverse(p, b, cfg.fact_fmt), cfg.work_fmt);
  rep.tri_solves += 2;
  double be = detail::record(rep, a, res.x, b, x_ref);
  detail::OuterMonitor mon(be);

  const Format& work = cfg.work_fmt;
  const Format tri_fmt = opt.tri_solves_in_fact_fmt ? cfg.fact_fmt : work;
  const LinearOperator apply_a = [&](std::span<const double> v) {
    return matvec_emulated(a, v, work);
  };
  // U^{-1} L^{-1} applied by substitution; the factors are never inverted.
  const LinearOperator precond = [&](std::span<const double> v) {
    rep.tri_solves += 2;
    return round_vector(detail::apply_lu_inverse(p, v, tri_fmt), work);
  };
  const Arith upd(work);

  while (!(be <= tol) && rep.iterations < cfg.max_iters) {
    const Vector r = round_vector(detail::residual(a, res.x, b, cfg.resid_fmt), work);
    const GmresResult g = gmres(apply_a, precond, r, inner_tol, inner_maxit, work, opt.restart);
    rep.inner_iterations.push_back(g.iterations);
    for (std::size_t i = 0; i < n; ++i) res.x[i] = upd.add(res.x[i], g.z[i]);
    ++rep.iterations;
    be = detail::record(rep, a, res.x, b, x_ref);
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
