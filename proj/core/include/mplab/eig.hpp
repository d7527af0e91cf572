#pragma once
//
// Symmetric eigenpair refinement: a cyclic Jacobi solver in an emulated
// format to produce starting pairs, the RefSyEv block refinement step,
// and SICE single-pair refinement.
//

#include <cstddef>
#include <span>

#include "mplab/dense.hpp"
#include "mplab/prec.hpp"

namespace mplab {

struct EigenPairs {
  DenseMatrix x;  // columns are eigenvectors
  Vector lambda;
  Format fmt = fp64;
};

inline constexpr int kJacobiMaxSweeps = 30;

/// Cyclic Jacobi with every operation rounded in fmt. Stops when the
/// off-diagonal Frobenius mass is <= tol * ||a||_F. Eigenvalues ascending.
/// Throws Error(no_convergence) after kJacobiMaxSweeps sweeps.
EigenPairs jacobi_eig(const DenseMatrix& a, const Format& fmt, double tol);

/// ||A||_2 of a symmetric matrix by power iteration from a fixed start.
double norm2_symmetric(const DenseMatrix& a, int iters = 100);

/// ||A x_i - lambda_i x_i||_2 / (||A||_2 ||x_i||_2) per column; a_norm2 < 0
/// means estimate it.
Vector eigen_residuals(const DenseMatrix& a, const EigenPairs& pairs, double a_norm2 = -1.0);

enum class NormChoice { frobenius, two_norm_estimate };

struct RefineStep {
  DenseMatrix e;     // refinement matrix
  double omega = 0;  // cluster threshold
  Vector residuals;  // of the returned pairs
  bool partial_spectrum = false;  // fewer columns than rows; accuracy may be limited
};

struct RefineResult {
  EigenPairs pairs;
  RefineStep step;
};

/// One RefSyEv step in binary64. The returned eigenvalues are the
/// s_ii / (1 - r_ii) estimates; residuals use Rayleigh quotients of X'.
RefineResult refine_syev(const DenseMatrix& a, const EigenPairs& pairs,
                         NormChoice norms = NormChoice::frobenius);

struct SiceResult {
  Vector x;  // normalized so that x[s] = 1
  double lambda = 0.0;
  std::size_t iters = 0;
  std::size_t s = 0;
  double residual = 0.0;   // ||A x - lambda x||_2 / (||A||_2 ||x||_2) at exit
  bool converged = false;  // residual <= 100 n u(fp64)
};

/// Newton-type refinement of one eigenpair through the column-replaced
/// system B y = lambda x - A x, solved by binary64 LU. Stops once the
/// correction to lambda stops halving, or after max_iters solves.
/// Throws Error(singular_b) when B is singular to working precision and
/// Error(invalid_argument) for x0 = 0.
SiceResult sice_refine(const DenseMatrix& a, std::span<const double> x0, double lambda0,
                       std::size_t max_iters);

}  // namespace mplab
