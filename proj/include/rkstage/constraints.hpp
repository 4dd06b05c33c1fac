// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rkstage/errors.hpp"
#include "rkstage/krylov.hpp"
#include "rkstage/sparse.hpp"

namespace rkstage {

/// Set of spatial dofs fixed by Dirichlet data; the same set applies to
/// every stage block.
class ConstrainedDofs {
 public:
  ConstrainedDofs() = default;
  ConstrainedDofs(std::size_t m, std::vector<std::size_t> dofs) : mask_(m, 0), dofs_(std::move(dofs)) {
    std::sort(dofs_.begin(), dofs_.end());
    dofs_.erase(std::unique(dofs_.begin(), dofs_.end()), dofs_.end());
    for (auto d : dofs_) {
      if (d >= m)
        throw DimensionMismatch("constrained dof " + std::to_string(d) + " out of range [0, " +
                                std::to_string(m) + ")");
      mask_[d] = 1;
    }
  }

  bool empty() const noexcept { return dofs_.empty(); }
  std::size_t block_size() const noexcept { return mask_.size(); }
  const std::vector<std::size_t>& dofs() const noexcept { return dofs_; }
  const std::vector<char>& mask() const noexcept { return mask_; }

  /// Zeros constrained entries of every stage block of v.
  void zero(Vector& v) const {
    if (dofs_.empty()) return;
    const auto m = static_cast<Eigen::Index>(mask_.size());
    for (Eigen::Index base = 0; base < v.size(); base += m)
      for (auto d : dofs_) v[base + static_cast<Eigen::Index>(d)] = 0.0;
  }

  /// Copies constrained entries of `from` into `to`.
  void copy(const Vector& from, Vector& to) const {
    const auto m = static_cast<Eigen::Index>(mask_.size());
    for (Eigen::Index base = 0; base < to.size(); base += m)
      for (auto d : dofs_) to[base + static_cast<Eigen::Index>(d)] = from[base + static_cast<Eigen::Index>(d)];
  }

 private:
  std::vector<char> mask_;
  std::vector<std::size_t> dofs_;
};

/// Operator with constrained rows replaced by identity rows and constrained
/// columns eliminated. Leaves the action on free dofs unchanged.
template <LinearOperator Op>
class ConstrainedOperator {
 public:
  ConstrainedOperator(const Op& op, ConstrainedDofs dofs) : op_(&op), dofs_(std::move(dofs)) {}
  std::size_t size() const noexcept { return op_->size(); }
  void apply(const Vector& x, Vector& y) const {
    if (dofs_.empty()) {
      op_->apply(x, y);
      return;
    }
    Vector free = x;
    dofs_.zero(free);
    op_->apply(free, y);
    dofs_.copy(x, y);
  }

 private:
  const Op* op_;
  ConstrainedDofs dofs_;
};

}  // namespace rkstage
