// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "rkstage/errors.hpp"
#include "rkstage/formulation.hpp"
#include "rkstage/sparse.hpp"

namespace rkstage {

using MatrixPtr = std::shared_ptr<const SparseMatrix>;

/// Matrix-free C1 (x) M + dt C2 (x) K on stacked stage vectors.
///
/// Row i of the block system is M_i (sum_j C1_ij v_j) + dt K_i (sum_j C2_ij v_j);
/// the per-stage matrices are all equal in the linear case and are stage
/// Jacobians in the nonlinear one. The combination over j is done in a
/// fixed order so results are reproducible.
class KroneckerStageOperator {
 public:
  KroneckerStageOperator(Eigen::MatrixXd C1, Eigen::MatrixXd C2, MatrixPtr M, MatrixPtr K,
                         double dt)
      : KroneckerStageOperator(std::move(C1), std::move(C2),
                               std::vector<MatrixPtr>{std::move(M)},
                               std::vector<MatrixPtr>{std::move(K)}, dt) {}

  KroneckerStageOperator(Eigen::MatrixXd C1, Eigen::MatrixXd C2, std::vector<MatrixPtr> masses,
                         std::vector<MatrixPtr> stiffnesses, double dt)
      : C1_(std::move(C1)),
        C2_(std::move(C2)),
        masses_(std::move(masses)),
        stiffnesses_(std::move(stiffnesses)),
        dt_(dt) {
    const auto s = static_cast<std::size_t>(C1_.rows());
    if (C1_.cols() != C1_.rows() || C2_.rows() != C1_.rows() || C2_.cols() != C1_.cols())
      throw DimensionMismatch("Kronecker coefficients must be square and of equal size");
    if ((masses_.size() != 1 && masses_.size() != s) ||
        (stiffnesses_.size() != 1 && stiffnesses_.size() != s))
      throw DimensionMismatch("need one matrix or one per stage");
    if (!masses_.front()) throw DimensionMismatch("null mass matrix");
    m_ = masses_.front()->rows();
    for (const auto* list : {&masses_, &stiffnesses_})
      for (const auto& A : *list)
        if (!A || A->rows() != m_ || A->cols() != m_)
          throw DimensionMismatch("stage matrices must be square of equal size");
  }

  std::size_t stages() const noexcept { return static_cast<std::size_t>(C1_.rows()); }
  std::size_t block_size() const noexcept { return m_; }
  std::size_t size() const noexcept { return stages() * m_; }
  double dt() const noexcept { return dt_; }
  const Eigen::MatrixXd& C1() const noexcept { return C1_; }
  const Eigen::MatrixXd& C2() const noexcept { return C2_; }
  const SparseMatrix& mass(std::size_t i) const { return *masses_[masses_.size() == 1 ? 0 : i]; }
  const SparseMatrix& stiffness(std::size_t i) const {
    return *stiffnesses_[stiffnesses_.size() == 1 ? 0 : i];
  }

  void apply(const Vector& v, Vector& out) const {
    if (static_cast<std::size_t>(v.size()) != size())
      throw DimensionMismatch("apply_kronecker: expected length " + std::to_string(size()));
    const auto s = static_cast<Eigen::Index>(stages());
    const auto m = static_cast<Eigen::Index>(m_);
    out.resize(v.size());
    Vector comb1(m), comb2(m), y1(m), y2(m);
    for (Eigen::Index i = 0; i < s; ++i) {
      comb1.setZero();
      comb2.setZero();
      for (Eigen::Index j = 0; j < s; ++j) {
        if (C1_(i, j) != 0.0) comb1 += C1_(i, j) * v.segment(j * m, m);
        if (C2_(i, j) != 0.0) comb2 += C2_(i, j) * v.segment(j * m, m);
      }
      const auto iu = static_cast<std::size_t>(i);
      mass(iu).multiply(comb1, y1);
      stiffness(iu).multiply(comb2, y2);
      out.segment(i * m, m) = y1 + dt_ * y2;
    }
  }

 private:
  Eigen::MatrixXd C1_;
  Eigen::MatrixXd C2_;
  std::vector<MatrixPtr> masses_;
  std::vector<MatrixPtr> stiffnesses_;
  double dt_;
  std::size_t m_ = 0;
};

inline Vector apply_kronecker(const KroneckerStageOperator& op, const Vector& v) {
  Vector out;
  op.apply(v, out);
  return out;
}

/// (C (x) I) v for an s x s matrix C and stacked v.
inline Vector kron_identity(const Eigen::MatrixXd& C, const Vector& v) {
  const auto s = C.rows();
  const auto m = v.size() / s;
  Eigen::Map<const Eigen::MatrixXd> V(v.data(), m, s);
  Vector out(v.size());
  Eigen::Map<Eigen::MatrixXd>(out.data(), m, s) = V * C.transpose();
  return out;
}

}  // namespace rkstage
