#pragma once
//
// Software emulation of reduced precision floating point formats.
//
// Values are always held as binary64. A Format describes the target
// arithmetic; round_value() maps a binary64 number onto the nearest (per
// rounding mode) number of that format, which is again exactly a binary64
// value because every supported format has at most 52 stored significand
// bits and at most 11 exponent bits. Arithmetic is emulated by computing
// the binary64 result and rounding it once.
//

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mplab {

enum class Rounding {
  nearest_even,
  toward_zero,
  toward_plus,
  toward_minus,
  stochastic,
};

std::string_view to_string(Rounding mode) noexcept;

struct Format {
  int exp_bits = 11;
  int sig_bits = 52;  // stored bits, implicit leading bit excluded
  bool subnormals = true;
  Rounding rounding = Rounding::nearest_even;

  constexpr int bias() const noexcept { return (1 << (exp_bits - 1)) - 1; }
  constexpr int emax() const noexcept { return bias(); }
  constexpr int emin() const noexcept { return 1 - bias(); }
  constexpr int precision() const noexcept { return sig_bits + 1; }
  constexpr int storage_bits() const noexcept { return 1 + exp_bits + sig_bits; }

  /// 2^-(sig_bits+1), the round-to-nearest unit roundoff.
  double unit_roundoff() const noexcept;
  /// Largest finite value, (2 - 2^-sig_bits) * 2^emax.
  double x_max() const noexcept;
  /// Smallest positive normal value.
  double x_min() const noexcept;
  /// Smallest positive value (subnormal if enabled, else x_min).
  double x_min_positive() const noexcept;

  /// True when the field invariants hold.
  bool valid() const noexcept;
  /// Throws Error(invalid_argument) unless valid().
  void validate() const;

  constexpr Format with_rounding(Rounding mode) const noexcept {
    Format f = *this;
    f.rounding = mode;
    return f;
  }
  constexpr Format with_subnormals(bool on) const noexcept {
    Format f = *this;
    f.subnormals = on;
    return f;
  }

  /// Same number system, ignoring rounding mode and subnormal flag.
  constexpr bool same_layout(const Format& other) const noexcept {
    return exp_bits == other.exp_bits && sig_bits == other.sig_bits;
  }

  bool operator==(const Format&) const = default;
};

inline constexpr Format fp16{5, 10};
inline constexpr Format bf16{8, 7};
inline constexpr Format fp32{8, 23};
inline constexpr Format fp64{11, 52};

/// "fp16", "bf16", "fp32", "fp64", or "e<exp>m<sig>" for other layouts.
std::string format_name(const Format& fmt);

/// Accepts the names produced by format_name (case insensitive).
std::optional<Format> parse_format(std::string_view name);

/// True when `a` has strictly smaller unit roundoff than `b`.
inline bool finer_than(const Format& a, const Format& b) noexcept {
  return a.sig_bits > b.sig_bits;
}

/// Next rung up the fp16/bf16 -> fp32 -> fp64 ladder; fp64 maps to itself.
Format promote(const Format& fmt) noexcept;

// Deterministic random source. The distributions are implemented here
// rather than taken from <random> so that streams are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (lo, hi); the endpoints are never returned.
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// Rounds x to fmt. `rng` must be non-null iff fmt.rounding is stochastic.
double round_value(double x, const Format& fmt, Rng* rng = nullptr);

/// True when round_value(x, fmt) == x under round-to-nearest.
bool representable(double x, const Format& fmt) noexcept;

/// Spacing of fmt numbers at |x| (quantum of the binade containing x,
/// subnormal spacing below x_min). Zero maps to the smallest spacing.
double ulp(double x, const Format& fmt) noexcept;

enum class Op { add, sub, mul, div, fma };

/// Computes op(a, b[, c]) in binary64 and rounds once to fmt. The inputs
/// are expected to be representable in fmt already.
double rounded_op(Op op, double a, double b, std::optional<double> c,
                  const Format& fmt, Rng* rng = nullptr);

/// Correctly rounded square root in fmt.
double rounded_sqrt(double a, const Format& fmt, Rng* rng = nullptr);

/// Mean of `trials` independent stochastic roundings of x. The format's
/// rounding field is ignored; stochastic rounding is always used.
double stochastic_expectation_probe(double x, const Format& fmt, Rng& rng,
                                    std::size_t trials);

std::vector<double> round_vector(std::span<const double> v, const Format& fmt,
                                 Rng* rng = nullptr);

// Arithmetic bound to one format. Kernels take one of these instead of
// threading fmt/rng through every scalar operation.
class Arith {
 public:
  explicit Arith(const Format& fmt, Rng* rng = nullptr);

  const Format& format() const noexcept { return fmt_; }
  bool exact() const noexcept { return kind_ == Kind::binary64; }

  double round(double x) const {
    switch (kind_) {
      case Kind::binary64:
        return x;
      case Kind::binary32:
        return static_cast<double>(static_cast<float>(x));
      default:
        return round_value(x, fmt_, rng_);
    }
  }

  double add(double a, double b) const {
    return kind_ == Kind::general ? exact_round(Op::add, a, b) : round(a + b);
  }
  double sub(double a, double b) const {
    return kind_ == Kind::general ? exact_round(Op::sub, a, b) : round(a - b);
  }
  double mul(double a, double b) const {
    return kind_ == Kind::general ? exact_round(Op::mul, a, b) : round(a * b);
  }
  double div(double a, double b) const {
    return kind_ == Kind::general ? exact_round(Op::div, a, b) : round(a / b);
  }
  double sqrt(double a) const;

  /// Rounded dot product, accumulated left to right.
  double dot(std::span<const double> x, std::span<const double> y) const;
  /// y <- y + alpha * x, every operation rounded.
  void axpy(double alpha, std::span<const double> x, std::span<double> y) const;
  /// Euclidean norm via a rounded dot product.
  double nrm2(std::span<const double> x) const;

 private:
  enum class Kind { binary64, binary32, general };

  double exact_round(Op op, double a, double b) const;

  Format fmt_;
  Rng* rng_;
  Kind kind_;
};

}  // namespace mplab
