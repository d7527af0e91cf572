#include "mplab/prec.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>

#include "mplab/error.hpp"

namespace mplab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::exact_zero_pivot: return "exact_zero_pivot";
    case ErrorCode::overflow_in_factor: return "overflow_in_factor";
    case ErrorCode::not_positive_definite: return "not_positive_definite";
    case ErrorCode::zero_diagonal: return "zero_diagonal";
    case ErrorCode::zero_row_or_column: return "zero_row_or_column";
    case ErrorCode::zero_matrix: return "zero_matrix";
    case ErrorCode::retry_cap_exceeded: return "retry_cap_exceeded";
    case ErrorCode::nonpositive_diagonal: return "nonpositive_diagonal";
    case ErrorCode::factorization_failed: return "factorization_failed";
    case ErrorCode::rank_deficient: return "rank_deficient";
    case ErrorCode::overflowed: return "overflowed";
    case ErrorCode::zero_pivot: return "zero_pivot";
    case ErrorCode::singular_b: return "singular_b";
    case ErrorCode::no_convergence: return "no_convergence";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::unsupported_field: return "unsupported_field";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::spec_error: return "spec_error";
  }
  return "unknown";
}

std::string_view to_string(Rounding mode) noexcept {
  switch (mode) {
    case Rounding::nearest_even: return "nearest-even";
    case Rounding::toward_zero: return "toward-zero";
    case Rounding::toward_plus: return "toward-plus";
    case Rounding::toward_minus: return "toward-minus";
    case Rounding::stochastic: return "stochastic";
  }
  return "unknown";
}

double Format::unit_roundoff() const noexcept {
  return std::ldexp(1.0, -(sig_bits + 1));
}

double Format::x_max() const noexcept {
  return std::ldexp(2.0 - std::ldexp(1.0, -sig_bits), emax());
}

double Format::x_min() const noexcept { return std::ldexp(1.0, emin()); }

double Format::x_min_positive() const noexcept {
  return subnormals ? std::ldexp(1.0, emin() - sig_bits) : x_min();
}

bool Format::valid() const noexcept {
  return exp_bits >= 2 && exp_bits <= 11 && sig_bits >= 1 && sig_bits <= 52 &&
         exp_bits + sig_bits + 1 <= 64;
}

void Format::validate() const {
  if (!valid()) {
    throw Error(ErrorCode::invalid_argument,
                "invalid format: exp_bits=" + std::to_string(exp_bits) +
                    " sig_bits=" + std::to_string(sig_bits));
  }
}

std::string format_name(const Format& fmt) {
  if (fmt.same_layout(fp16)) return "fp16";
  if (fmt.same_layout(bf16)) return "bf16";
  if (fmt.same_layout(fp32)) return "fp32";
  if (fmt.same_layout(fp64)) return "fp64";
  return "e" + std::to_string(fmt.exp_bits) + "m" + std::to_string(fmt.sig_bits);
}

std::optional<Format> parse_format(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "fp16" || s == "half" || s == "binary16") return fp16;
  if (s == "bf16" || s == "bfloat16") return bf16;
  if (s == "fp32" || s == "single" || s == "binary32") return fp32;
  if (s == "fp64" || s == "double" || s == "binary64") return fp64;
  if (s.size() >= 4 && s[0] == 'e') {
    const auto m = s.find('m');
    if (m == std::string::npos) return std::nullopt;
    try {
      std::size_t used_e = 0, used_m = 0;
      const std::string es = s.substr(1, m - 1), ms = s.substr(m + 1);
      Format f{std::stoi(es, &used_e), std::stoi(ms, &used_m)};
      if (used_e != es.size() || used_m != ms.size() || !f.valid()) return std::nullopt;
      return f;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

Format promote(const Format& fmt) noexcept {
  Format out = fmt;
  if (fmt.sig_bits < fp32.sig_bits) {
    out.exp_bits = fp32.exp_bits;
    out.sig_bits = fp32.sig_bits;
  } else {
    out.exp_bits = fp64.exp_bits;
    out.sig_bits = fp64.sig_bits;
  }
  return out;
}

// --- Rng -----------------------------------------------------------------

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  for (;;) {
    const double v = lo + (hi - lo) * uniform();
    if (v > lo && v < hi) return v;
  }
}

double Rng::normal() {
  if (spare_normal_) {
    const double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  double u1 = 0.0;
  while (u1 == 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    const std::uint64_t v = engine_();
    if (v < limit) return v % n;
  }
}

// --- rounding ------------------------------------------------------------

namespace {

bool is_binary64(const Format& f) { return f.same_layout(fp64) && f.subnormals; }

bool is_binary32_nearest(const Format& f) {
  return f.same_layout(fp32) && f.subnormals && f.rounding == Rounding::nearest_even;
}

// Rounds y (|y| < 2^53, so floor/frac are exact) to an integer.
double round_integer(double y, Rounding mode, Rng* rng) {
  switch (mode) {
    case Rounding::nearest_even: {
      double fl = std::floor(y);
      const double frac = y - fl;
      if (frac > 0.5 || (frac == 0.5 && std::fmod(fl, 2.0) != 0.0)) fl += 1.0;
      return fl;
    }
    case Rounding::toward_zero:
      return std::trunc(y);
    case Rounding::toward_plus:
      return std::ceil(y);
    case Rounding::toward_minus:
      return std::floor(y);
    case Rounding::stochastic: {
      const double fl = std::floor(y);
      const double frac = y - fl;
      return (frac > 0.0 && rng->uniform() < frac) ? fl + 1.0 : fl;
    }
  }
  return y;
}

double overflow_value(double x, const Format& f) {
  const bool neg = std::signbit(x);
  const double inf = std::numeric_limits<double>::infinity();
  const double xmax = f.x_max();
  switch (f.rounding) {
    case Rounding::toward_zero:
      return neg ? -xmax : xmax;
    case Rounding::toward_plus:
      return neg ? -xmax : inf;
    case Rounding::toward_minus:
      return neg ? -inf : xmax;
    default:
      return neg ? -inf : inf;
  }
}

// |x| < x_min and the format has no subnormals.
double flush_value(double x, const Format& f, Rng* rng) {
  const double xmin = f.x_min();
  const double ax = std::fabs(x);
  const double zero = std::copysign(0.0, x);
  const double small = std::copysign(xmin, x);
  switch (f.rounding) {
    case Rounding::nearest_even:
      return ax > 0.5 * xmin ? small : zero;  // the tie goes to the even 0
    case Rounding::toward_zero:
      return zero;
    case Rounding::toward_plus:
      return x > 0.0 ? small : zero;
    case Rounding::toward_minus:
      return x < 0.0 ? small : zero;
    case Rounding::stochastic:
      return rng->uniform() < ax / xmin ? small : zero;
  }
  return zero;
}

double round_general(double x, const Format& f, Rng* rng) {
  if (!std::isfinite(x) || x == 0.0) return x;
  const int emin = f.emin();
  if (!f.subnormals && std::fabs(x) < std::ldexp(1.0, emin)) {
    return flush_value(x, f, rng);
  }
  int e = 0;
  std::frexp(x, &e);
  e -= 1;  // |x| in [2^e, 2^(e+1))
  const int t = f.precision();
  const int quantum_exp = std::max(e, emin) - (t - 1);
  const double scaled = std::ldexp(x, -quantum_exp);
  double c = std::ldexp(round_integer(scaled, f.rounding, rng), quantum_exp);
  if (std::fabs(c) > f.x_max()) c = overflow_value(x, f);
  if (c == 0.0) c = std::copysign(0.0, x);
  return c;
}

// Rounds an operation result s whose exact value is s + err (err being the
// binary64 rounding error, possibly only known by sign). When err != 0 the
// exact value lies strictly between s and its binary64 neighbour towards
// err; every supported non-binary64 grid is coarser than binary64, so
// stepping one binary64 ulp in that direction reproduces the rounding of
// the exact value in every mode.
double round_with_sticky(double s, double err, const Format& f, Rng* rng) {
  if (err != 0.0 && std::isfinite(s) && !std::isnan(err) && f.sig_bits < 52) {
    s = std::nextafter(s, err > 0.0 ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity());
  }
  return round_general(s, f, rng);
}

double two_sum_err(double a, double b, double s) {
  const double bb = s - a;
  return (a - (s - bb)) + (b - bb);
}

void require_rng(const Format& f, const Rng* rng) {
  if (f.rounding == Rounding::stochastic && rng == nullptr) {
    throw Error(ErrorCode::invalid_argument,
                "stochastic rounding requires a random number generator");
  }
}

double rounded_binary(Op op, double a, double b, const Format& fmt, Rng* rng) {
  switch (op) {
    case Op::add: {
      const double s = a + b;
      return is_binary64(fmt) ? s : round_with_sticky(s, two_sum_err(a, b, s), fmt, rng);
    }
    case Op::sub: {
      const double s = a - b;
      return is_binary64(fmt) ? s : round_with_sticky(s, two_sum_err(a, -b, s), fmt, rng);
    }
    case Op::mul: {
      const double p = a * b;
      return is_binary64(fmt) ? p : round_with_sticky(p, std::fma(a, b, -p), fmt, rng);
    }
    case Op::div: {
      const double q = a / b;
      if (is_binary64(fmt)) return q;
      // a/b - q = rem/b
      const double rem = std::fma(-q, b, a);
      return round_with_sticky(q, std::signbit(b) ? -rem : rem, fmt, rng);
    }
    case Op::fma:
      break;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double round_value(double x, const Format& fmt, Rng* rng) {
  require_rng(fmt, rng);
  if (is_binary64(fmt)) return x;
  if (is_binary32_nearest(fmt)) return static_cast<double>(static_cast<float>(x));
  return round_general(x, fmt, rng);
}

bool representable(double x, const Format& fmt) noexcept {
  if (std::isnan(x)) return true;
  return round_value(x, fmt.with_rounding(Rounding::nearest_even)) == x;
}

double ulp(double x, const Format& fmt) noexcept {
  const double ax = std::fabs(x);
  const int emin = fmt.emin();
  if (ax < std::ldexp(1.0, emin) || ax == 0.0) {
    return std::ldexp(1.0, emin - fmt.sig_bits);
  }
  int e = 0;
  std::frexp(ax, &e);
  return std::ldexp(1.0, e - 1 - fmt.sig_bits);
}

double rounded_op(Op op, double a, double b, std::optional<double> c,
                  const Format& fmt, Rng* rng) {
  require_rng(fmt, rng);
  assert(representable(a, fmt) && representable(b, fmt) &&
         (!c || representable(*c, fmt)) && "rounded_op operands must be in fmt");
  if (op == Op::fma) {
    if (!c) throw Error(ErrorCode::invalid_argument, "fma requires a third operand");
    // Single binary64 rounding of a*b+c, then one rounding to fmt.
    return round_value(std::fma(a, b, *c), fmt, rng);
  }
  return rounded_binary(op, a, b, fmt, rng);
}

double rounded_sqrt(double a, const Format& fmt, Rng* rng) {
  require_rng(fmt, rng);
  const double s = std::sqrt(a);
  if (is_binary64(fmt) || !std::isfinite(s) || s == 0.0) return round_value(s, fmt, rng);
  return round_with_sticky(s, std::fma(-s, s, a), fmt, rng);
}

double stochastic_expectation_probe(double x, const Format& fmt, Rng& rng,
                                    std::size_t trials) {
  if (trials == 0) throw Error(ErrorCode::invalid_argument, "trials must be >= 1");
  const Format sr = fmt.with_rounding(Rounding::stochastic);
  double sum = 0.0;
  for (std::size_t i = 0; i < trials; ++i) sum += round_value(x, sr, &rng);
  return sum / static_cast<double>(trials);
}

std::vector<double> round_vector(std::span<const double> v, const Format& fmt,
                                 Rng* rng) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = round_value(v[i], fmt, rng);
  return out;
}

// --- Arith ---------------------------------------------------------------

Arith::Arith(const Format& fmt, Rng* rng) : fmt_(fmt), rng_(rng) {
  fmt.validate();
  require_rng(fmt, rng);
  if (is_binary64(fmt)) {
    kind_ = Kind::binary64;
  } else if (is_binary32_nearest(fmt)) {
    kind_ = Kind::binary32;
  } else {
    kind_ = Kind::general;
  }
}

double Arith::sqrt(double a) const { return rounded_sqrt(a, fmt_, rng_); }

double Arith::exact_round(Op op, double a, double b) const {
  return rounded_binary(op, a, b, fmt_, rng_);
}

double Arith::dot(std::span<const double> x, std::span<const double> y) const {
  double acc = 0.0;
  if (kind_ == Kind::binary64) {
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
  }
  for (std::size_t i = 0; i < x.size(); ++i) acc = add(acc, mul(x[i], y[i]));
  return acc;
}

void Arith::axpy(double alpha, std::span<const double> x, std::span<double> y) const {
  if (kind_ == Kind::binary64) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
    return;
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = add(y[i], mul(alpha, x[i]));
}

double Arith::nrm2(std::span<const double> x) const { return sqrt(dot(x, x)); }

}  // namespace mplab
