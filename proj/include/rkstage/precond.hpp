// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rkstage/constraints.hpp"
#include "rkstage/errors.hpp"
#include "rkstage/formulation.hpp"
#include "rkstage/kronecker.hpp"
#include "rkstage/sparse.hpp"
#include "rkstage/tableaux.hpp"

namespace rkstage {

enum class PreconditionerKind { BlockDiagonal, BlockLower, BlockUpper, RanaLD, RanaDU };

inline std::string to_flag(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::BlockDiagonal: return "jacobi";
    case PreconditionerKind::BlockLower: return "gs-lower";
    case PreconditionerKind::BlockUpper: return "gs-upper";
    case PreconditionerKind::RanaLD: return "rana-ld";
    case PreconditionerKind::RanaDU: return "rana-du";
  }
  return "?";
}

/// Empty optional for "none".
inline std::optional<PreconditionerKind> preconditioner_from_flag(const std::string& flag) {
  if (flag == "jacobi") return PreconditionerKind::BlockDiagonal;
  if (flag == "gs-lower") return PreconditionerKind::BlockLower;
  if (flag == "gs-upper") return PreconditionerKind::BlockUpper;
  if (flag == "rana-ld") return PreconditionerKind::RanaLD;
  if (flag == "rana-du") return PreconditionerKind::RanaDU;
  if (flag == "none") return std::nullopt;
  throw Error("unknown preconditioner '" + flag + "'");
}

/// Triangular (or diagonal) replacement of A used by each kind.
inline DenseMatrix approximate_butcher_matrix(PreconditionerKind kind, const ButcherTableau& tab) {
  const DenseMatrix& A = tab.A();
  switch (kind) {
    case PreconditionerKind::BlockDiagonal:
      return DenseMatrix(A.diagonal().asDiagonal());
    case PreconditionerKind::BlockLower:
      return A.triangularView<Eigen::Lower>();
    case PreconditionerKind::BlockUpper:
      return A.triangularView<Eigen::Upper>();
    case PreconditionerKind::RanaLD: {
      const auto f = ldu_factor(tab);
      return f.L * f.D.asDiagonal();
    }
    case PreconditionerKind::RanaDU: {
      const auto f = ldu_factor(tab);
      return f.D.asDiagonal() * f.U;
    }
  }
  throw Error("unknown preconditioner kind");
}

/// Block triangular preconditioner for the stage-coupled system obtained by
/// replacing A with a triangular approximation.
///
/// IA form: P = Ainv~ (x) M + dt I (x) K, diagonal blocks (Ainv~)_ii M + dt K.
/// AI form: P = I (x) M + dt A~ (x) K, diagonal blocks M + dt A~_ii K.
/// Diagonal blocks are factorized once at construction.
class StagePreconditioner {
 public:
  StagePreconditioner(PreconditionerKind kind, const ButcherTableau& tab,
                      std::vector<MatrixPtr> masses, std::vector<MatrixPtr> stiffnesses, double dt,
                      Splitting form, ConstrainedDofs dofs = {})
      : kind_(kind),
        form_(form),
        masses_(std::move(masses)),
        stiffnesses_(std::move(stiffnesses)),
        dt_(dt),
        dofs_(std::move(dofs)) {
    const int s = tab.stages();
    if (masses_.empty() || stiffnesses_.empty() ||
        (masses_.size() != 1 && masses_.size() != static_cast<std::size_t>(s)) ||
        (stiffnesses_.size() != 1 && stiffnesses_.size() != static_cast<std::size_t>(s)))
      throw DimensionMismatch("preconditioner: need one matrix or one per stage");
    if (!masses_.front()) throw DimensionMismatch("preconditioner: null mass matrix");
    m_ = masses_.front()->rows();
    for (const auto* list : {&masses_, &stiffnesses_})
      for (const auto& A : *list)
        if (!A || A->rows() != m_ || A->cols() != m_)
          throw DimensionMismatch("preconditioner: M and K must be square of equal size");
    if (!dofs_.empty() && dofs_.block_size() != m_)
      throw DimensionMismatch("preconditioner: constraint mask size");

    if (form_ == Splitting::IA && !is_invertible(tab))
      throw FormulationError("IA-form preconditioner requires an invertible Butcher matrix");
    approx_ = approximate_butcher_matrix(kind, tab);
    for (int i = 0; i < s; ++i)
      if (form_ == Splitting::IA && std::abs(approx_(i, i)) < tolerances::pivot)
        throw SingularFactorization(static_cast<std::size_t>(i),
                                    "preconditioner: zero diagonal in approximate Butcher matrix");
    if (form_ == Splitting::IA) {
      approx_inv_ = approx_.inverse();
      // Clean fill outside the triangle introduced by the dense inverse.
      if (kind_ == PreconditionerKind::BlockDiagonal)
        approx_inv_ = DenseMatrix(approx_inv_.diagonal().asDiagonal());
      else if (lower())
        approx_inv_ = approx_inv_.triangularView<Eigen::Lower>();
      else
        approx_inv_ = approx_inv_.triangularView<Eigen::Upper>();
    }
    coupling_ = form_ == Splitting::IA ? approx_inv_ : approx_;

    blocks_.reserve(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      SparseMatrix block = form_ == Splitting::IA
                               ? linear_combination(approx_inv_(i, i), mass(iu), dt_, stiffness(iu))
                               : linear_combination(1.0, mass(iu), dt_ * approx_(i, i), stiffness(iu));
      if (!dofs_.empty()) block = eliminate_dofs(block, dofs_.mask());
      try {
        blocks_.emplace_back(block);
      } catch (const FactorizationError& e) {
        throw FactorizationError("stage " + std::to_string(i + 1) + " block: " + e.what());
      }
    }
  }

  StagePreconditioner(PreconditionerKind kind, const ButcherTableau& tab, MatrixPtr M, MatrixPtr K,
                      double dt, Splitting form, ConstrainedDofs dofs = {})
      : StagePreconditioner(kind, tab, std::vector<MatrixPtr>{std::move(M)},
                            std::vector<MatrixPtr>{std::move(K)}, dt, form, std::move(dofs)) {}

  PreconditionerKind kind() const noexcept { return kind_; }
  Splitting form() const noexcept { return form_; }
  double dt() const noexcept { return dt_; }
  std::size_t stages() const noexcept { return blocks_.size(); }
  std::size_t block_size() const noexcept { return m_; }
  std::size_t size() const noexcept { return stages() * m_; }
  /// The triangular replacement A~ of the Butcher matrix.
  const DenseMatrix& approximation() const noexcept { return approx_; }
  /// Its inverse (IA form only).
  const DenseMatrix& approximation_inverse() const noexcept { return approx_inv_; }
  const BlockFactorization& block(std::size_t i) const { return blocks_.at(i); }
  bool lower() const noexcept { return kind_ != PreconditionerKind::BlockUpper && kind_ != PreconditionerKind::RanaDU; }

  /// z = P^{-1} r by block forward (lower kinds) or back (upper kinds) substitution.
  void apply(const Vector& r, Vector& z) const {
    if (static_cast<std::size_t>(r.size()) != size())
      throw DimensionMismatch("apply_preconditioner: expected length " + std::to_string(size()));
    const auto s = static_cast<Eigen::Index>(stages());
    const auto m = static_cast<Eigen::Index>(m_);
    z = Vector::Zero(r.size());
    Vector comb(m), coupled(m), rhs(m), zi(m);
    for (Eigen::Index step = 0; step < s; ++step) {
      const Eigen::Index i = lower() ? step : s - 1 - step;
      const auto iu = static_cast<std::size_t>(i);
      rhs = r.segment(i * m, m);
      comb.setZero();
      bool any = false;
      for (Eigen::Index j = 0; j < s; ++j) {
        if (j == i || coupling_(i, j) == 0.0) continue;
        comb += coupling_(i, j) * z.segment(j * m, m);
        any = true;
      }
      if (any) {
        dofs_.zero(comb);
        if (form_ == Splitting::IA) {
          mass(iu).multiply(comb, coupled);
        } else {
          stiffness(iu).multiply(comb, coupled);
          coupled *= dt_;
        }
        dofs_.zero(coupled);
        rhs -= coupled;
      }
      blocks_[iu].solve(rhs, zi);
      z.segment(i * m, m) = zi;
    }
  }

 private:
  const SparseMatrix& mass(std::size_t i) const { return *masses_[masses_.size() == 1 ? 0 : i]; }
  const SparseMatrix& stiffness(std::size_t i) const {
    return *stiffnesses_[stiffnesses_.size() == 1 ? 0 : i];
  }

  PreconditionerKind kind_;
  Splitting form_;
  std::vector<MatrixPtr> masses_;
  std::vector<MatrixPtr> stiffnesses_;
  double dt_;
  ConstrainedDofs dofs_;
  std::size_t m_ = 0;
  DenseMatrix approx_;
  DenseMatrix approx_inv_;
  DenseMatrix coupling_;
  std::vector<BlockFactorization> blocks_;
};

inline StagePreconditioner build_preconditioner(PreconditionerKind kind, const ButcherTableau& tab,
                                                MatrixPtr M, MatrixPtr K, double dt, Splitting form,
                                                ConstrainedDofs dofs = {}) {
  return StagePreconditioner(kind, tab, std::move(M), std::move(K), dt, form, std::move(dofs));
}

inline Vector apply_preconditioner(const StagePreconditioner& pc, const Vector& r) {
  Vector z;
  pc.apply(r, z);
  return z;
}

}  // namespace rkstage
