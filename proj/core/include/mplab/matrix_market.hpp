#pragma once
//
// Matrix Market reader and writer (real, general or symmetric).
//

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "mplab/dense.hpp"
#include "mplab/sparse.hpp"

namespace mplab {

using MarketMatrix = std::variant<CsrMatrix, DenseMatrix>;

/// Coordinate files give a CsrMatrix (duplicates summed, symmetric files
/// expanded), array files a DenseMatrix. Integer fields are accepted as real.
/// Throws Error(parse_error) with the 1-based line number in index(),
/// Error(unsupported_field) for complex/pattern data, Error(io_error).
MarketMatrix read_matrix_market(std::istream& in);
MarketMatrix load_matrix_market(const std::filesystem::path& path);

/// Coordinate real general; values in shortest round-trip form.
void write_matrix_market(std::ostream& out, const CsrMatrix& a);
void save_matrix_market(const std::filesystem::path& path, const CsrMatrix& a);

}  // namespace mplab
