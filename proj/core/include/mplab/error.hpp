#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mplab {

// Every typed failure the library raises. The experiment harness writes
// to_string(code) into the CSV status column.
enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  exact_zero_pivot,
  overflow_in_factor,
  not_positive_definite,
  zero_diagonal,
  zero_row_or_column,
  zero_matrix,
  retry_cap_exceeded,
  nonpositive_diagonal,
  factorization_failed,
  rank_deficient,
  overflowed,
  zero_pivot,
  singular_b,
  no_convergence,
  parse_error,
  unsupported_field,
  io_error,
  spec_error,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(what), code_(code), index_(index) {}

  ErrorCode code() const noexcept { return code_; }

  /// Row, pivot or line number associated with the failure, if any.
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace mplab
