#pragma once
// Conversions between mplab containers and Eigen, for binary64 oracles.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <span>
#include <vector>

#include "mplab/dense.hpp"
#include "mplab/sparse.hpp"

namespace oracle {

inline Eigen::MatrixXd to_eigen(const mplab::DenseMatrix& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
  return m;
}

inline mplab::DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
  mplab::DenseMatrix a(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a(i, j) = m(i, j);
  return a;
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  Eigen::VectorXd e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e(i) = v[i];
  return e;
}

inline std::vector<double> from_eigen_vec(const Eigen::VectorXd& e) {
  return std::vector<double>(e.data(), e.data() + e.size());
}

inline Eigen::SparseMatrix<double, Eigen::RowMajor> to_eigen(const mplab::CsrMatrix& a) {
  std::vector<Eigen::Triplet<double>> t;
  const auto off = a.row_offsets();
  const auto col = a.col_indices();
  const auto val = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = off[i]; k < off[i + 1]; ++k) t.emplace_back(i, col[k], val[k]);
  Eigen::SparseMatrix<double, Eigen::RowMajor> s(a.rows(), a.cols());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

}  // namespace oracle
