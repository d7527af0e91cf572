#include "mplab/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mplab/error.hpp"
#include "refine_detail.hpp"

namespace mplab {

namespace detail {

PreparedLu prepare_lu(const DenseMatrix& a, const Format& fact_fmt, double theta) {
  PreparedLu p;
  try {
    if (needs_scaling(fact_fmt)) {
      const Equilibration eq = equilibrate(a);
      p.theta = theta;
      ScaledHalf sh = scale_round(a, eq.r_scale, eq.s_scale, p.theta, fact_fmt);
      while (true) {
        try {
          p.lu = lu_emulated(sh.a_h, fact_fmt);
          break;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::overflow_in_factor || p.rescales == kMaxRescales) throw;
        }
        ++p.rescales;
        p.theta *= kRescaleFactor;
        sh = scale_round(a, eq.r_scale, eq.s_scale, p.theta, fact_fmt);
      }
      p.scaled = true;
      p.mu = sh.mu;
      p.r_scale = std::move(sh.r_scale);
      p.s_scale = std::move(sh.s_scale);
    } else {
      p.lu = lu_emulated(a, fact_fmt);
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::factorization_failed,
                std::string("factorization failed (") + std::string(to_string(e.code())) +
                    "): " + e.what(),
                e.index());
  }
  return p;
}

double pow2_scale(std::span<const double> v) {
  const double m = norm_inf(v);
  if (m == 0.0 || !std::isfinite(m)) return 1.0;
  int e = 0;
  std::frexp(m, &e);
  return std::ldexp(1.0, e);
}

Vector apply_lu_inverse(const PreparedLu& p, std::span<const double> v, const Format& fmt) {
  const std::size_t n = v.size();
  Vector t(v.begin(), v.end());
  if (p.scaled) {
    for (std::size_t i = 0; i < n; ++i) t[i] = p.mu * p.r_scale[i] * t[i];
  }
  const double sigma = pow2_scale(t);
  for (double& x : t) x /= sigma;
  Vector y = lu_solve(p.lu, t, fmt);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] *= sigma;
    if (p.scaled) y[i] *= p.s_scale[i];
  }
  return y;
}

Vector residual(const DenseMatrix& a, std::span<const double> x, std::span<const double> b,
                const Format& fmt) {
  const Arith ar(fmt);
  Vector r(a.rows());
  if (ar.exact()) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const auto row = a.row(i);
      double acc = b[i];
      for (std::size_t j = 0; j < a.cols(); ++j) acc -= row[j] * x[j];
      r[i] = acc;
    }
    return r;
  }
  const Vector xr = round_vector(x, fmt);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double acc = ar.round(b[i]);
    for (std::size_t j = 0; j < a.cols(); ++j) acc = ar.sub(acc, ar.mul(ar.round(row[j]), xr[j]));
    r[i] = acc;
  }
  return r;
}

double default_tol(std::size_t n, const Format& work_fmt) {
  return std::max(static_cast<double>(n) * work_fmt.unit_roundoff(), 1e-14);
}

double record(IrReport& rep, const DenseMatrix& a, std::span<const double> x,
              std::span<const double> b, std::span<const double> x_ref) {
  const double be = backward_error(a, x, b);
  rep.backward_errors.push_back(be);
  if (!x_ref.empty()) rep.forward_errors.push_back(forward_error(x, x_ref));
  return be;
}

bool OuterMonitor::diverged(double be) {
  // NaN counts as growth.
  if (!(be <= 10.0 * best_)) {
    ++grow_;
  } else {
    grow_ = 0;
  }
  if (!(be <= 0.5 * prev_)) {
    ++stall_;
  } else {
    stall_ = 0;
  }
  if (be < best_) best_ = be;
  prev_ = be;
  return grow_ >= 3;
}

}  // namespace detail

void IrConfig::validate() const {
  fact_fmt.validate();
  work_fmt.validate();
  resid_fmt.validate();
  x_fmt.validate();
  if (finer_than(work_fmt, resid_fmt) || finer_than(fact_fmt, work_fmt)) {
    throw Error(ErrorCode::invalid_argument,
                "IrConfig: need u_r <= u_w <= u_f (got fact=" + format_name(fact_fmt) +
                    ", work=" + format_name(work_fmt) + ", resid=" + format_name(resid_fmt) +
                    ")");
  }
  if (!(tol >= 0.0)) throw Error(ErrorCode::invalid_argument, "IrConfig: tol must be >= 0");
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "IrConfig: theta must lie in (0, 1]");
  }
  if (inner && inner->inner_tol < 0.0) {
    throw Error(ErrorCode::invalid_argument, "IrConfig: inner_tol must be >= 0");
  }
}

std::string_view to_string(IrStatus s) noexcept {
  switch (s) {
    case IrStatus::converged:
      return "converged";
    case IrStatus::max_iters:
      return "max_iters";
    case IrStatus::diverged:
      return "diverged";
  }
  return "unknown";
}

double backward_error(const DenseMatrix& a, std::span<const double> x,
                      std::span<const double> b) {
  if (x.size() != a.cols() || b.size() != a.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "backward_error: size mismatch");
  }
  const Vector r = detail::residual(a, x, b, fp64);
  const double num = norm_inf(r);
  const double den = norm_inf(a) * norm_inf(x) + norm_inf(b);
  if (den == 0.0) return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return num / den;
}

double normalized_residual(const DenseMatrix& a, std::span<const double> x,
                           std::span<const double> b) {
  if (x.size() != a.cols() || b.size() != a.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "normalized_residual: size mismatch");
  }
  const double num = norm_inf(detail::residual(a, x, b, fp64));
  const double den = norm_inf(a) * norm_inf(x);
  if (den == 0.0) return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return num / den;
}

double forward_error(std::span<const double> x, std::span<const double> x_ref) {
  if (x.size() != x_ref.size()) {
    throw Error(ErrorCode::dimension_mismatch, "forward_error: size mismatch");
  }
  double num = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) num = std::max(num, std::fabs(x[i] - x_ref[i]));
  const double den = norm_inf(x_ref);
  if (den == 0.0) return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return num / den;
}

IrResult ir_solve(const DenseMatrix& a, std::span<const double> b, const IrConfig& cfg,
                  std::span<const double> x_ref) {
  if (!a.square() || b.size() != a.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "ir_solve: size mismatch");
  }
  cfg.validate();
  const std::size_t n = a.rows();
  const double tol = cfg.tol > 0.0 ? cfg.tol : detail::default_tol(n, cfg.work_fmt);

  const detail::PreparedLu p = detail::prepare_lu(a, cfg.fact_fmt, cfg.theta);
  IrResult res;
  IrReport& rep = res.report;
  rep.scaled = p.scaled;
  rep.rescales = p.rescales;
  if (p.rescales) rep.events.push_back("theta reduced to " + std::to_string(p.theta) + " after overflow");

  Format x_fmt = cfg.x_fmt;
  res.x = round_vector(detail::apply_lu_inverse(p, b, cfg.fact_fmt), x_fmt);
  rep.tri_solves += 2;
  double be = detail::record(rep, a, res.x, b, x_ref);
  detail::OuterMonitor mon(be);

  while (!(be <= tol) && rep.iterations < cfg.max_iters) {
    const Vector r = round_vector(detail::residual(a, res.x, b, cfg.resid_fmt), cfg.work_fmt);
    const Vector z = round_vector(detail::apply_lu_inverse(p, r, cfg.fact_fmt), cfg.work_fmt);
    rep.tri_solves += 2;
    const Arith upd(x_fmt);
    for (std::size_t i = 0; i < n; ++i) res.x[i] = upd.add(res.x[i], upd.round(z[i]));
    ++rep.iterations;
    be = detail::record(rep, a, res.x, b, x_ref);
    if (mon.diverged(be)) {
      rep.status = IrStatus::diverged;
      rep.events.push_back("diverged at iteration " + std::to_string(rep.iterations));
      break;
    }
    if (cfg.escalate && mon.stagnated() && !(be <= tol) && finer_than(fp64, x_fmt)) {
      const Format next = promote(x_fmt);
      rep.events.push_back("x_fmt " + format_name(x_fmt) + " -> " + format_name(next) +
                           " at iteration " + std::to_string(rep.iterations));
      x_fmt = next;
      mon.reset_stall();
    }
  }
  rep.converged = be <= tol;
  if (rep.converged) rep.status = IrStatus::converged;
  return res;
}

double orthogonality_defect(const DenseMatrix& v) {
  const std::size_t k = v.cols();
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double g = 0.0;
      for (std::size_t r = 0; r < v.rows(); ++r) g += v(r, i) * v(r, j);
      const double d = (i == j ? 1.0 : 0.0) - g;
      s += d * d;
    }
  }
  return std::sqrt(s);
}

DenseMatrix mgs_orthonormalize(const DenseMatrix& a, const Format& fmt) {
  const Arith ar(fmt);
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  // Work on columns as contiguous rows of the transpose.
  DenseMatrix q = round_matrix(a, fmt).transpose();
  for (std::size_t j = 0; j < k; ++j) {
    auto qj = q.row(j);
    for (std::size_t i = 0; i < j; ++i) {
      const double h = ar.dot(q.row(i), qj);
      ar.axpy(-h, q.row(i), qj);
    }
    const double nrm = ar.nrm2(qj);
    if (nrm == 0.0) {
      throw Error(ErrorCode::rank_deficient,
                  "mgs_orthonormalize: dependent column " + std::to_string(j), j);
    }
    for (std::size_t r = 0; r < m; ++r) qj[r] = ar.div(qj[r], nrm);
  }
  return q.transpose();
}

}  // namespace mplab
