#pragma once
//
// Deterministic test matrix families.
//

#include <cstddef>
#include <optional>
#include <string_view>
#include <variant>

#include "mplab/dense.hpp"
#include "mplab/prec.hpp"
#include "mplab/sparse.hpp"

namespace mplab {

enum class Family { uniform, randsvd, laplacian2d, spd_shifted };

std::string_view to_string(Family f) noexcept;
std::optional<Family> parse_family(std::string_view name);

struct MatrixGenerator {
  Family family = Family::uniform;
  std::size_t n = 0;      // columns; grid side for laplacian2d
  std::size_t m = 0;      // rows for rectangular randsvd/uniform; 0 means n
  double kappa = 1.0;     // randsvd target 2-norm condition number
  double density = 1.0;   // fraction of nonzeros kept in M for spd_shifted

  /// Throws Error(invalid_argument).
  void validate() const;
};

using GeneratedMatrix = std::variant<DenseMatrix, CsrMatrix>;

/// laplacian2d yields a CsrMatrix; every other family a DenseMatrix.
GeneratedMatrix generate(const MatrixGenerator& gen, Rng& rng);

/// m x n, m >= n, with orthonormal columns drawn from the Haar measure
/// (Householder QR of a Gaussian matrix, signs fixed by diag(R)).
DenseMatrix random_orthonormal(std::size_t m, std::size_t n, Rng& rng);

/// U diag(sigma) V^T with sigma_i = kappa^(-i/(n-1)), i = 0..n-1.
DenseMatrix randsvd(std::size_t m, std::size_t n, double kappa, Rng& rng);

/// Entries i.i.d. uniform on (-1, 1).
DenseMatrix uniform_matrix(std::size_t m, std::size_t n, Rng& rng);

/// 5-point Laplacian on a side x side grid (Dirichlet boundary).
CsrMatrix laplacian2d(std::size_t side);

/// M^T M + n I with M uniform (entries kept with probability `density`).
DenseMatrix spd_shifted(std::size_t n, Rng& rng, double density = 1.0);

/// Random symmetric matrix, entries uniform on (-1, 1).
DenseMatrix random_symmetric(std::size_t n, Rng& rng);

}  // namespace mplab
