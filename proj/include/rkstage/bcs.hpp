// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rkstage/constraints.hpp"
#include "rkstage/errors.hpp"
#include "rkstage/formulation.hpp"
#include "rkstage/krylov.hpp"
#include "rkstage/tableaux.hpp"

namespace rkstage {

/// Strong Dirichlet data u(t, dof) = g(t, dof) on a fixed set of dofs.
struct DirichletBC {
  std::vector<std::size_t> dofs;
  std::function<double(double, std::size_t)> g;
  /// Time derivative of g; only the ODE method uses it.
  std::function<double(double, std::size_t)> g_dot;
};

/// Boundary values of the stage unknowns, one row per stage and one column
/// per constrained dof (in the order of `bc.dofs`).
///
/// DAE: derivative unknowns solve A k = (g(t + c dt) - u^n) / dt per dof,
/// sharing one LU of A; w and Y unknowns are given directly.
/// ODE: k_i = g'(t + c_i dt), mapped through w = A k or Y = u^n + dt A k.
inline DenseMatrix stage_bc_values(BcMethod method, const ButcherTableau& tab,
                                   const DirichletBC& bc, const Vector& u_n, double t, double dt,
                                   StageFormulation form) {
  const int s = tab.stages();
  const auto ndof = static_cast<Eigen::Index>(bc.dofs.size());
  for (auto d : bc.dofs)
    if (d >= static_cast<std::size_t>(u_n.size()))
      throw DimensionMismatch("boundary dof " + std::to_string(d) + " out of range");
  DenseMatrix values(s, ndof);
  const DenseVector& c = tab.c();
  const DenseMatrix& A = tab.A();

  if (method == BcMethod::DAE) {
    if (!is_invertible(tab))
      throw BoundaryConditionError("DAE boundary conditions require an invertible Butcher matrix");
    if (!(dt > 0.0)) throw BoundaryConditionError("DAE boundary conditions require dt > 0");
    if (!bc.g) throw BoundaryConditionError("Dirichlet data g is missing");
    DenseMatrix rhs(s, ndof);
    for (Eigen::Index k = 0; k < ndof; ++k) {
      const auto d = bc.dofs[static_cast<std::size_t>(k)];
      for (int i = 0; i < s; ++i) {
        const double gi = bc.g(t + c[i] * dt, d);
        rhs(i, k) = form == StageFormulation::StageValue ? gi : (gi - u_n[static_cast<Eigen::Index>(d)]) / dt;
      }
    }
    if (form == StageFormulation::StageDerivativeAI || form == StageFormulation::Dirk)
      values = Eigen::PartialPivLU<DenseMatrix>(A).solve(rhs);
    else
      values = rhs;
    return values;
  }

  if (!bc.g_dot) throw BoundaryConditionError("ODE boundary conditions require g_dot");
  DenseMatrix k(s, ndof);
  for (Eigen::Index j = 0; j < ndof; ++j)
    for (int i = 0; i < s; ++i) k(i, j) = bc.g_dot(t + c[i] * dt, bc.dofs[static_cast<std::size_t>(j)]);
  switch (form) {
    case StageFormulation::StageDerivativeAI:
    case StageFormulation::Dirk:
      values = k;
      break;
    case StageFormulation::StageDerivativeIA:
      values = A * k;
      break;
    case StageFormulation::StageValue: {
      values = dt * (A * k);
      for (Eigen::Index j = 0; j < ndof; ++j)
        values.col(j).array() += u_n[static_cast<Eigen::Index>(bc.dofs[static_cast<std::size_t>(j)])];
      break;
    }
  }
  return values;
}

/// Stacks per-stage boundary values into a full-length vector that is zero
/// on free dofs.
inline Vector lift_stage_values(const ConstrainedDofs& dofs, const DenseMatrix& values,
                                std::size_t stages) {
  const auto m = static_cast<Eigen::Index>(dofs.block_size());
  Vector lift = Vector::Zero(static_cast<Eigen::Index>(stages) * m);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(stages); ++i)
    for (std::size_t k = 0; k < dofs.dofs().size(); ++k)
      lift[i * m + static_cast<Eigen::Index>(dofs.dofs()[k])] = values(i, static_cast<Eigen::Index>(k));
  return lift;
}

template <LinearOperator Op>
struct ConstrainedStageSystem {
  ConstrainedOperator<Op> op;
  Vector rhs;
  /// Boundary values on constrained entries, zero elsewhere.
  Vector initial_guess;
};

/// Row replacement plus column elimination on every stage block.
///
/// Constrained rows become identity rows whose right-hand side is the known
/// value; the known values' contributions to free rows move to the
/// right-hand side. `values` must be ordered like `dofs.dofs()`.
template <LinearOperator Op>
ConstrainedStageSystem<Op> constrain_stage_system(const Op& op, const Vector& rhs,
                                                  const ConstrainedDofs& dofs,
                                                  const DenseMatrix& values) {
  if (static_cast<std::size_t>(rhs.size()) != op.size())
    throw DimensionMismatch("constrain_stage_system: rhs size");
  if (dofs.empty()) return {ConstrainedOperator<Op>(op, dofs), rhs, Vector::Zero(rhs.size())};
  const std::size_t stages = op.size() / dofs.block_size();
  if (stages * dofs.block_size() != op.size() || static_cast<std::size_t>(values.rows()) != stages ||
      static_cast<std::size_t>(values.cols()) != dofs.dofs().size())
    throw DimensionMismatch("constrain_stage_system: stage value shape");
  Vector lift = lift_stage_values(dofs, values, stages);
  Vector applied;
  op.apply(lift, applied);
  Vector out = rhs - applied;
  dofs.copy(lift, out);
  return {ConstrainedOperator<Op>(op, dofs), std::move(out), std::move(lift)};
}

}  // namespace rkstage
