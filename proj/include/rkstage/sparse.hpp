// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "rkstage/errors.hpp"

namespace rkstage {

using Vector = Eigen::VectorXd;

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Real matrix in compressed sparse row form.
///
/// Column indices are strictly increasing within each row; duplicates in
/// the input triplets are summed.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  SparseMatrix(std::size_t nrows, std::size_t ncols, std::vector<Triplet> triplets)
      : nrows_(nrows), ncols_(ncols), row_offsets_(nrows + 1, 0) {
    for (const auto& t : triplets)
      if (t.row >= nrows || t.col >= ncols)
        throw DimensionMismatch("triplet index out of range");
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    for (std::size_t k = 0; k < triplets.size(); ++k) {
      const auto& t = triplets[k];
      if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
        values_.back() += t.value;
        continue;
      }
      col_indices_.push_back(t.col);
      values_.push_back(t.value);
      ++row_offsets_[t.row + 1];
    }
    for (std::size_t i = 0; i < nrows; ++i) row_offsets_[i + 1] += row_offsets_[i];
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return SparseMatrix(n, n, std::move(t));
  }

  static SparseMatrix from_dense(const Eigen::MatrixXd& dense) {
    std::vector<Triplet> t;
    for (Eigen::Index i = 0; i < dense.rows(); ++i)
      for (Eigen::Index j = 0; j < dense.cols(); ++j)
        if (dense(i, j) != 0.0)
          t.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), dense(i, j)});
    return SparseMatrix(static_cast<std::size_t>(dense.rows()),
                        static_cast<std::size_t>(dense.cols()), std::move(t));
  }

  std::size_t rows() const noexcept { return nrows_; }
  std::size_t cols() const noexcept { return ncols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  const std::vector<std::size_t>& row_offsets() const noexcept { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const noexcept { return col_indices_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double coeff(std::size_t i, std::size_t j) const {
    const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
    const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    return (it != last && *it == j) ? values_[static_cast<std::size_t>(it - col_indices_.begin())]
                                    : 0.0;
  }

  /// y = A x
  void multiply(const Vector& x, Vector& y) const {
    if (static_cast<std::size_t>(x.size()) != ncols_)
      throw DimensionMismatch("spmv: vector length " + std::to_string(x.size()) +
                              " does not match " + std::to_string(ncols_) + " columns");
    y.resize(static_cast<Eigen::Index>(nrows_));
    for (std::size_t i = 0; i < nrows_; ++i) {
      double sum = 0.0;
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        sum += values_[k] * x[static_cast<Eigen::Index>(col_indices_[k])];
      y[static_cast<Eigen::Index>(i)] = sum;
    }
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (std::size_t i = 0; i < nrows_; ++i)
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        t.push_back({i, col_indices_[k], values_[k]});
    return t;
  }

  SparseMatrix transpose() const {
    auto t = triplets();
    for (auto& e : t) std::swap(e.row, e.col);
    return SparseMatrix(ncols_, nrows_, std::move(t));
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nrows_),
                                              static_cast<Eigen::Index>(ncols_));
    for (const auto& e : triplets())
      d(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
    return d;
  }

  Eigen::SparseMatrix<double> to_eigen() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(nnz());
    for (const auto& e : triplets())
      t.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.value);
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(nrows_),
                                  static_cast<Eigen::Index>(ncols_));
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
  }

 private:
  std::size_t nrows_ = 0;
  std::size_t ncols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

inline Vector spmv(const SparseMatrix& A, const Vector& x) {
  Vector y;
  A.multiply(x, y);
  return y;
}

/// alpha*A + beta*B over the union sparsity pattern.
inline SparseMatrix linear_combination(double alpha, const SparseMatrix& A, double beta,
                                       const SparseMatrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw DimensionMismatch("linear_combination: shapes differ");
  auto t = A.triplets();
  for (auto& e : t) e.value *= alpha;
  for (auto e : B.triplets()) {
    e.value *= beta;
    t.push_back(e);
  }
  return SparseMatrix(A.rows(), A.cols(), std::move(t));
}

/// Replaces the rows and columns of `dofs` by those of the identity.
inline SparseMatrix eliminate_dofs(const SparseMatrix& A, const std::vector<char>& constrained) {
  if (constrained.size() != A.rows() || A.rows() != A.cols())
    throw DimensionMismatch("eliminate_dofs: mask size does not match matrix");
  std::vector<Triplet> t;
  t.reserve(A.nnz());
  for (const auto& e : A.triplets())
    if (!constrained[e.row] && !constrained[e.col]) t.push_back(e);
  for (std::size_t i = 0; i < A.rows(); ++i)
    if (constrained[i]) t.push_back({i, i, 1.0});
  return SparseMatrix(A.rows(), A.cols(), std::move(t));
}

/// Matrix Market coordinate real general, 1-based indices.
inline void write_matrix_market(std::ostream& os, const SparseMatrix& A) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows() << ' ' << A.cols() << ' ' << A.nnz() << '\n';
  os.precision(17);
  for (const auto& e : A.triplets()) os << e.row + 1 << ' ' << e.col + 1 << ' ' << e.value << '\n';
}

inline SparseMatrix read_matrix_market(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("%%MatrixMarket matrix coordinate real general", 0) != 0)
    throw Error("unsupported Matrix Market banner");
  do {
    if (!std::getline(is, line)) throw Error("Matrix Market: missing size line");
  } while (line.empty() || line[0] == '%');
  std::istringstream size_line(line);
  std::size_t nrows = 0, ncols = 0, nnz = 0;
  if (!(size_line >> nrows >> ncols >> nnz)) throw Error("Matrix Market: bad size line");
  std::vector<Triplet> t;
  t.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    std::size_t i = 0, j = 0;
    double v = 0.0;
    if (!(is >> i >> j >> v) || i == 0 || j == 0) throw Error("Matrix Market: bad entry");
    t.push_back({i - 1, j - 1, v});
  }
  return SparseMatrix(nrows, ncols, std::move(t));
}

/// Sparse LU of one diagonal block (COLAMD fill-reducing ordering).
///
/// Numerical singularity is detected by a solve round trip on a fixed
/// random vector, since SparseLU only reports exactly-zero pivots.
class BlockFactorization {
 public:
  explicit BlockFactorization(const SparseMatrix& block) : n_(block.rows()) {
    if (block.rows() != block.cols()) throw DimensionMismatch("block must be square");
    matrix_ = block.to_eigen();
    lu_ = std::make_shared<Solver>();
    lu_->analyzePattern(matrix_);
    lu_->factorize(matrix_);
    if (lu_->info() != Eigen::Success)
      throw FactorizationError("singular block: " + lu_->lastErrorMessage());

    std::mt19937_64 gen(0x5eed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vector x(static_cast<Eigen::Index>(n_));
    for (auto& v : x) v = dist(gen);
    const Vector recovered = lu_->solve(Vector(matrix_ * x));
    if (!recovered.allFinite() || (recovered - x).norm() > 1e-6 * x.norm())
      throw FactorizationError("numerically singular block");
  }

  std::size_t size() const noexcept { return n_; }

  void solve(const Vector& b, Vector& x) const {
    if (static_cast<std::size_t>(b.size()) != n_) throw DimensionMismatch("block solve size");
    x = lu_->solve(b);
  }

  Vector solve(const Vector& b) const {
    Vector x;
    solve(b, x);
    return x;
  }

 private:
  using Solver = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
  std::size_t n_;
  Eigen::SparseMatrix<double> matrix_;
  std::shared_ptr<Solver> lu_;
};

/// Factorizes alpha*M + dt*K.
inline BlockFactorization factorize_block(const SparseMatrix& M, const SparseMatrix& K,
                                          double alpha, double dt) {
  if (M.rows() != M.cols() || K.rows() != K.cols() || M.rows() != K.rows())
    throw DimensionMismatch("factorize_block: M and K must be square and of equal size");
  return BlockFactorization(linear_combination(alpha, M, dt, K));
}

}  // namespace rkstage
