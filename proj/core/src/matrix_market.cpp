#include "mplab/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mplab/error.hpp"

namespace mplab {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::parse_error, "matrix market line " + std::to_string(line) + ": " + what,
              line);
}

// Next line that is neither blank nor a comment.
bool next_data_line(std::istream& in, std::string& line, std::size_t& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    const auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '%') continue;
    return true;
  }
  return false;
}

std::size_t parse_index(const std::string& tok, std::size_t line) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) fail(line, "bad integer '" + tok + "'");
  return v;
}

double parse_real(const std::string& tok, std::size_t line) {
  // strtod accepts the Fortran-style forms some writers emit; from_chars does not.
  std::string t = tok;
  std::replace(t.begin(), t.end(), 'd', 'e');
  std::replace(t.begin(), t.end(), 'D', 'e');
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) fail(line, "bad value '" + tok + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

}  // namespace

MarketMatrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(1, "empty input");
  ++lineno;
  const auto head = split(line);
  if (head.size() < 5 || lower(head[0]) != "%%matrixmarket" || lower(head[1]) != "matrix") {
    fail(lineno, "missing %%MatrixMarket matrix banner");
  }
  const std::string layout = lower(head[2]);
  const std::string field = lower(head[3]);
  const std::string symmetry = lower(head[4]);
  if (layout != "coordinate" && layout != "array") fail(lineno, "unknown layout '" + head[2] + "'");
  if (field == "complex" || field == "pattern") {
    throw Error(ErrorCode::unsupported_field, "matrix market: field '" + field + "' not supported",
                lineno);
  }
  if (field != "real" && field != "integer" && field != "double") {
    fail(lineno, "unknown field '" + head[3] + "'");
  }
  if (symmetry == "hermitian" || symmetry == "skew-symmetric") {
    throw Error(ErrorCode::unsupported_field,
                "matrix market: symmetry '" + symmetry + "' not supported", lineno);
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    fail(lineno, "unknown symmetry '" + head[4] + "'");
  }
  const bool sym = symmetry == "symmetric";

  if (!next_data_line(in, line, lineno)) fail(lineno, "missing size line");
  const auto size = split(line);

  if (layout == "array") {
    if (size.size() != 2) fail(lineno, "array size line needs 2 fields");
    const std::size_t rows = parse_index(size[0], lineno);
    const std::size_t cols = parse_index(size[1], lineno);
    if (sym && rows != cols) fail(lineno, "symmetric array must be square");
    DenseMatrix a(rows, cols);
    // Column-major; symmetric files list the lower triangle only.
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = sym ? j : 0; i < rows; ++i) {
        if (!next_data_line(in, line, lineno)) fail(lineno, "too few array entries");
        const auto tok = split(line);
        if (tok.size() != 1) fail(lineno, "expected one value");
        a(i, j) = parse_real(tok[0], lineno);
        if (sym) a(j, i) = a(i, j);
      }
    }
    return a;
  }

  if (size.size() != 3) fail(lineno, "coordinate size line needs 3 fields");
  const std::size_t rows = parse_index(size[0], lineno);
  const std::size_t cols = parse_index(size[1], lineno);
  const std::size_t nnz = parse_index(size[2], lineno);
  if (sym && rows != cols) fail(lineno, "symmetric matrix must be square");
  std::vector<Triplet> t;
  t.reserve(sym ? 2 * nnz : nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    if (!next_data_line(in, line, lineno)) fail(lineno, "expected " + std::to_string(nnz) + " entries");
    const auto tok = split(line);
    if (tok.size() != 3) fail(lineno, "expected 'row col value'");
    const std::size_t i = parse_index(tok[0], lineno);
    const std::size_t j = parse_index(tok[1], lineno);
    if (i < 1 || i > rows || j < 1 || j > cols) fail(lineno, "index out of range");
    const double v = parse_real(tok[2], lineno);
    t.push_back({i - 1, j - 1, v});
    if (sym && i != j) t.push_back({j - 1, i - 1, v});
  }
  return CsrMatrix::from_triplets(rows, cols, std::move(t));
}

MarketMatrix load_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const CsrMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  const auto off = a.row_offsets();
  const auto col = a.col_indices();
  const auto val = a.values();
  char buf[64];
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
      const auto r = std::to_chars(buf, buf + sizeof buf, val[k]);
      out << i + 1 << ' ' << col[k] + 1 << ' ' << std::string_view(buf, r.ptr - buf) << '\n';
    }
  }
}

void save_matrix_market(const std::filesystem::path& path, const CsrMatrix& a) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  write_matrix_market(out, a);
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

}  // namespace mplab
