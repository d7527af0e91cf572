#include "mplab/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "mplab/error.hpp"

namespace mplab {

CsrMatrix::CsrMatrix(std::size_t n_rows, std::size_t n_cols,
                     std::vector<std::size_t> row_offsets, std::vector<std::size_t> col_indices,
                     std::vector<double> values)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (row_offsets_.size() != n_rows_ + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != values_.size() || col_indices_.size() != values_.size()) {
    throw Error(ErrorCode::invalid_argument, "CsrMatrix: inconsistent array lengths");
  }
  for (std::size_t i = 0; i < n_rows_; ++i) {
    if (row_offsets_[i] > row_offsets_[i + 1]) {
      throw Error(ErrorCode::invalid_argument, "CsrMatrix: row offsets decrease at row " +
                                                   std::to_string(i), i);
    }
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      if (col_indices_[k] >= n_cols_ ||
          (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1])) {
        throw Error(ErrorCode::invalid_argument,
                    "CsrMatrix: column indices out of range or unsorted in row " +
                        std::to_string(i), i);
      }
    }
  }
}

CsrMatrix CsrMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triplet> entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(n_rows + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(entries.size());
  vals.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Triplet& t = entries[k];
    if (t.row >= n_rows || t.col >= n_cols) {
      throw Error(ErrorCode::invalid_argument, "CsrMatrix: triplet index out of range");
    }
    if (k > 0 && t.row == entries[k - 1].row && t.col == entries[k - 1].col) {
      vals.back() += t.value;
      continue;
    }
    cols.push_back(t.col);
    vals.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t i = 0; i < n_rows; ++i) offsets[i + 1] += offsets[i];
  return CsrMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
}

CsrMatrix CsrMatrix::from_dense(const DenseMatrix& a) {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) {
        cols.push_back(j);
        vals.push_back(a(i, j));
      }
    }
    offsets.push_back(vals.size());
  }
  return CsrMatrix(a.rows(), a.cols(), std::move(offsets), std::move(cols), std::move(vals));
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<std::size_t> offsets(n + 1), cols(n);
  for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
  for (std::size_t i = 0; i < n; ++i) cols[i] = i;
  return CsrMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix d(n_rows_, n_cols_);
  for (std::size_t i = 0; i < n_rows_; ++i)
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
      d(i, col_indices_[k]) = values_[k];
  return d;
}

CsrMatrix CsrMatrix::with_values(std::vector<double> values) const {
  return CsrMatrix(n_rows_, n_cols_, row_offsets_, col_indices_, std::move(values));
}

Vector spmv(const CsrMatrix& a, std::span<const double> x, const Format& fmt) {
  if (x.size() != a.cols()) throw Error(ErrorCode::dimension_mismatch, "spmv: size mismatch");
  const Arith ar(fmt);
  const auto off = a.row_offsets();
  const auto col = a.col_indices();
  const auto val = a.values();
  Vector y(a.rows(), 0.0);
  if (ar.exact()) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t k = off[i]; k < off[i + 1]; ++k) acc += val[k] * x[col[k]];
      y[i] = acc;
    }
    return y;
  }
  const Vector xr = round_vector(x, fmt);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t k = off[i]; k < off[i + 1]; ++k)
      acc = ar.add(acc, ar.mul(ar.round(val[k]), xr[col[k]]));
    y[i] = acc;
  }
  return y;
}

// --- clustered compression ----------------------------------------------

Vector ClusteredCsr::reconstruct() const {
  Vector v(nnz());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = value(k);
  return v;
}

CsrMatrix ClusteredCsr::to_csr() const {
  return CsrMatrix(n_rows, n_cols, row_offsets, col_indices, reconstruct());
}

namespace {

constexpr Format kLadder[] = {fp16, fp32, fp64};

bool within(double v, double c, const Format& fmt, double tau, double floor) {
  const double r = round_value(v - c, fmt);
  return std::fabs((c + r) - v) <= tau * std::max(std::fabs(v), floor);
}

}  // namespace

ClusteredCsr compress_clustered(const CsrMatrix& a, std::size_t k, double tau, Rng& rng,
                                std::optional<Format> force_fmt, std::size_t max_iters) {
  if (k == 0 || k > kMaxClusters) {
    throw Error(ErrorCode::invalid_argument, "compress_clustered: k must lie in [1, 256]");
  }
  if (!(tau >= 0.0)) throw Error(ErrorCode::invalid_argument, "compress_clustered: tau < 0");
  ClusteredCsr m;
  m.n_rows = a.rows();
  m.n_cols = a.cols();
  m.row_offsets.assign(a.row_offsets().begin(), a.row_offsets().end());
  m.col_indices.assign(a.col_indices().begin(), a.col_indices().end());
  const auto vals = a.values();
  if (vals.empty()) return m;

  m.centers = kmeans1d(vals, k, max_iters, rng);
  const double floor = tau * norm_inf(vals);

  // Values the finest rung cannot reproduce go to a zero center, where the
  // residual is the value itself.
  std::vector<bool> to_zero(vals.size(), false);
  auto flag_unreachable = [&] {
    bool any = false;
    if (force_fmt) return any;
    for (std::size_t q = 0; q < vals.size(); ++q) {
      const double c = m.centers[nearest_center(m.centers, vals[q])];
      to_zero[q] = !within(vals[q], c, fp64, tau, floor);
      any = any || to_zero[q];
    }
    return any;
  };
  bool any_zero = flag_unreachable();
  if (any_zero && !std::binary_search(m.centers.begin(), m.centers.end(), 0.0)) {
    if (m.centers.size() == kMaxClusters) {
      m.centers = kmeans1d(vals, kMaxClusters - 1, max_iters, rng);
      any_zero = flag_unreachable();
    }
    if (any_zero) {
      m.centers.push_back(0.0);
      std::sort(m.centers.begin(), m.centers.end());
    }
  }
  std::size_t zero_id = 0;
  if (any_zero) {
    zero_id = static_cast<std::size_t>(
        std::lower_bound(m.centers.begin(), m.centers.end(), 0.0) - m.centers.begin());
  }

  m.ids.resize(vals.size());
  for (std::size_t q = 0; q < vals.size(); ++q) {
    const std::size_t id = to_zero[q] ? zero_id : nearest_center(m.centers, vals[q]);
    m.ids[q] = static_cast<std::uint8_t>(id);
  }

  const std::size_t nc = m.centers.size();
  m.residual_fmt.assign(nc, force_fmt.value_or(fp16));
  if (!force_fmt) {
    // Coarsest rung that every member of the cluster satisfies.
    std::vector<int> rung(nc, 0);
    for (std::size_t q = 0; q < vals.size(); ++q) {
      const std::size_t id = m.ids[q];
      while (rung[id] < 2 && !within(vals[q], m.centers[id], kLadder[rung[id]], tau, floor)) {
        ++rung[id];
      }
    }
    for (std::size_t c = 0; c < nc; ++c) m.residual_fmt[c] = kLadder[rung[c]];
  }
  m.residuals.resize(vals.size());
  for (std::size_t q = 0; q < vals.size(); ++q) {
    const std::size_t id = m.ids[q];
    m.residuals[q] = round_value(vals[q] - m.centers[id], m.residual_fmt[id]);
  }
  return m;
}

Vector spmv_clustered(const ClusteredCsr& m, std::span<const double> x) {
  if (x.size() != m.n_cols) throw Error(ErrorCode::dimension_mismatch, "spmv_clustered: size");
  Vector y(m.n_rows, 0.0);
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    double acc = 0.0;
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
      acc += m.value(k) * x[m.col_indices[k]];
    y[i] = acc;
  }
  return y;
}

Footprint footprint_bits(const ClusteredCsr& m) {
  Footprint f;
  f.total_bits = 64 * m.centers.size();
  for (std::size_t q = 0; q < m.nnz(); ++q) {
    f.total_bits += 8 + static_cast<std::size_t>(m.residual_fmt[m.ids[q]].storage_bits());
  }
  f.bits_per_value = m.nnz() ? static_cast<double>(f.total_bits) / static_cast<double>(m.nnz())
                             : 0.0;
  return f;
}

}  // namespace mplab
