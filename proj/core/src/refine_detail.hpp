#pragma once
// Shared pieces of the square-system refinement drivers.

#include <span>

#include "mplab/dense.hpp"
#include "mplab/refine.hpp"

namespace mplab::detail {

// Narrow formats get two-sided scaling before the factorization.
inline bool needs_scaling(const Format& f) { return f.sig_bits < 23; }

// LU factors of round(a) or of the scaled matrix mu*R*a*S.
struct PreparedLu {
  LuFactors lu;
  bool scaled = false;
  double mu = 1.0;
  Vector r_scale;
  Vector s_scale;
  double theta = 0.0;         // headroom actually used
  std::size_t rescales = 0;   // retries after an overflow in the factorization
};

inline constexpr std::size_t kMaxRescales = 3;
inline constexpr double kRescaleFactor = 0.125;

// Scaled formats: an overflow during LU means the pivot growth outran the
// headroom theta left, so the scaling is redone with a smaller theta.
PreparedLu prepare_lu(const DenseMatrix& a, const Format& fact_fmt, double theta);

// z ~ A^{-1} v. The triangular solves run in `fmt`; the right-hand side is
// normalized by a power of two first so it sits well inside fmt's range.
Vector apply_lu_inverse(const PreparedLu& p, std::span<const double> v, const Format& fmt);

// b - A x with every operation rounded in fmt.
Vector residual(const DenseMatrix& a, std::span<const double> x, std::span<const double> b,
                const Format& fmt);

double default_tol(std::size_t n, const Format& work_fmt);

// 2^e with |v| * 2^-e in [0.5, 1) for the largest entry; 1 for a zero vector.
double pow2_scale(std::span<const double> v);

// Appends backward/forward error for x and returns the backward error.
double record(IrReport& rep, const DenseMatrix& a, std::span<const double> x,
              std::span<const double> b, std::span<const double> x_ref);

// Shared bookkeeping for the outer loop: divergence and stagnation rules.
class OuterMonitor {
 public:
  explicit OuterMonitor(double first) : best_(first), prev_(first) {}
  // Feeds the next backward error; returns true when the 3-strike
  // divergence rule fires.
  bool diverged(double be);
  // True when be has failed to halve for 3 consecutive steps.
  bool stagnated() const { return stall_ >= 3; }
  void reset_stall() { stall_ = 0; }

 private:
  double best_;
  double prev_;
  int grow_ = 0;
  int stall_ = 0;
};

}  // namespace mplab::detail
