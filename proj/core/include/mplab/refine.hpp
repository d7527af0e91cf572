#pragma once
//
// Refinement engines: classical and three-precision iterative refinement,
// MGS-GMRES, GMRES-based refinement, and Cholesky-based GMRES-IR for least
// squares, plus the error metrics used to judge them.
//

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mplab/dense.hpp"
#include "mplab/prec.hpp"

namespace mplab {

struct GmresOptions {
  double inner_tol = 0.0;        // 0: 1e-4 for fp16-class factors, 1e-8 for fp32, 1e-12 otherwise
  std::size_t inner_maxit = 0;   // 0: min(n, 100)
  std::size_t restart = 0;       // 0: no restart
  bool tri_solves_in_fact_fmt = false;
};

struct IrConfig {
  Format fact_fmt = fp32;   // u_f
  Format work_fmt = fp64;   // u_w
  Format resid_fmt = fp64;  // u_r
  Format x_fmt = fp64;      // storage of the iterate
  double tol = 0.0;         // 0: max(n * u_w, 1e-14)
  std::size_t max_iters = 50;
  std::optional<GmresOptions> inner;
  double theta = 0.1;       // headroom for scale_round
  bool escalate = false;    // promote x_fmt when refinement stagnates

  /// Checks u_r <= u_w <= u_f and tol >= 0; throws Error(invalid_argument).
  void validate() const;
};

enum class IrStatus { converged, max_iters, diverged };

std::string_view to_string(IrStatus s) noexcept;

struct IrReport {
  std::size_t iterations = 0;           // refinement steps after the initial solve
  std::vector<double> backward_errors;  // size iterations + 1
  std::vector<double> forward_errors;   // filled when a reference solution is given
  bool converged = false;
  IrStatus status = IrStatus::max_iters;
  std::vector<std::size_t> inner_iterations;  // GMRES iterations per refinement step
  std::optional<long> shift_c;                // shift multiplier of a shifted Cholesky
  bool scaled = false;                        // factorization used scale_round
  std::size_t rescales = 0;                   // theta reductions after LU overflow
  std::size_t tri_solves = 0;
  std::vector<std::string> events;
};

struct IrResult {
  Vector x;
  IrReport report;
};

/// ||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf), binary64. Returns
/// +inf when the denominator vanishes but the residual does not.
double backward_error(const DenseMatrix& a, std::span<const double> x,
                      std::span<const double> b);

/// ||b - A x||_inf / (||A||_inf ||x||_inf), the form used for the integer LU
/// sweeps.
double normalized_residual(const DenseMatrix& a, std::span<const double> x,
                           std::span<const double> b);

/// ||x - x_ref||_inf / ||x_ref||_inf
double forward_error(std::span<const double> x, std::span<const double> x_ref);

/// Classical / three-precision iterative refinement with LU factors in
/// cfg.fact_fmt. `x_ref`, when non-empty, adds forward errors to the report.
/// Throws Error(factorization_failed).
IrResult ir_solve(const DenseMatrix& a, std::span<const double> b, const IrConfig& cfg,
                  std::span<const double> x_ref = {});

using LinearOperator = std::function<Vector(std::span<const double>)>;

struct GmresResult {
  Vector z;
  std::vector<double> res_history;  // estimated relative residuals, starting at 1
  double basis_defect = 0.0;        // ||I - V^T V||_F of the final Krylov basis
  std::size_t iterations = 0;
  bool converged = false;
  bool breakdown = false;
};

/// Left-preconditioned MGS-GMRES from a zero initial guess, every operation
/// rounded in fmt. An empty `precond` means the identity. Hitting maxit is
/// reported through converged = false.
GmresResult gmres(const LinearOperator& apply_op, const LinearOperator& precond,
                  std::span<const double> rhs, double tol, std::size_t maxit,
                  const Format& fmt, std::size_t restart = 0);

/// GMRES-based refinement: LU factors in fact_fmt precondition GMRES in
/// work_fmt. cfg.inner must be set.
IrResult gmres_ir_solve(const DenseMatrix& a, std::span<const double> b, const IrConfig& cfg,
                        std::span<const double> x_ref = {});

struct LsqResult {
  Vector x;
  IrReport report;
  std::size_t flops_per_apply = 0;  // cost of one M A^T A product
};

/// ||A^T (b - A x)||_inf / (||A^T A||_inf ||x||_inf + ||A^T b||_inf).
double normal_equations_backward_error(const DenseMatrix& a, std::span<const double> x,
                                       std::span<const double> b);

/// Cholesky-based GMRES-IR for min ||b - A x||_2, A m x n with m >= n.
/// Throws Error(rank_deficient) when the shifted Cholesky cannot succeed.
LsqResult lsq_gmres_ir(const DenseMatrix& a, std::span<const double> b, const IrConfig& cfg,
                       double theta = 0.1, long c0 = 2);

/// ||I - V^T V||_F in binary64.
double orthogonality_defect(const DenseMatrix& v);

/// Modified Gram-Schmidt on the columns of a, arithmetic in fmt.
DenseMatrix mgs_orthonormalize(const DenseMatrix& a, const Format& fmt);

}  // namespace mplab
