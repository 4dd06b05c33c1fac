// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <utility>

#include "rkstage/bcs.hpp"
#include "rkstage/kronecker.hpp"
#include "rkstage/sparse.hpp"

namespace rkstage {

/// Semidiscrete system F(t, u, u') = 0 on R^m.
///
/// Linear problems carry M, K and f with F = M u' + K u - f(t); the residual
/// and Jacobian evaluators are then filled in from them so the Newton path
/// works on either kind.
struct SemidiscreteProblem {
  using ResidualFn = std::function<Vector(double, const Vector&, const Vector&)>;
  using JacobianFn = std::function<SparseMatrix(double, const Vector&, const Vector&)>;

  std::size_t m = 0;
  MatrixPtr mass;
  MatrixPtr stiffness;
  std::function<Vector(double)> load;

  ResidualFn residual;
  JacobianFn mass_jacobian;       ///< dF/du'
  JacobianFn stiffness_jacobian;  ///< dF/du

  std::optional<DirichletBC> dirichlet;

  bool is_linear() const noexcept { return mass && stiffness; }
};

inline SemidiscreteProblem make_linear_problem(SparseMatrix M, SparseMatrix K,
                                               std::function<Vector(double)> load,
                                               std::optional<DirichletBC> bc = std::nullopt) {
  if (M.rows() != M.cols() || K.rows() != K.cols() || M.rows() != K.rows())
    throw DimensionMismatch("linear problem: M and K must be square and of equal size");
  SemidiscreteProblem p;
  p.m = M.rows();
  p.mass = std::make_shared<const SparseMatrix>(std::move(M));
  p.stiffness = std::make_shared<const SparseMatrix>(std::move(K));
  const auto m = static_cast<Eigen::Index>(p.m);
  p.load = load ? std::move(load) : std::function<Vector(double)>([m](double) { return Vector(Vector::Zero(m)); });
  p.residual = [M = p.mass, K = p.stiffness, f = p.load](double t, const Vector& u, const Vector& udot) {
    return Vector(spmv(*M, udot) + spmv(*K, u) - f(t));
  };
  p.mass_jacobian = [M = p.mass](double, const Vector&, const Vector&) { return *M; };
  p.stiffness_jacobian = [K = p.stiffness](double, const Vector&, const Vector&) { return *K; };
  p.dirichlet = std::move(bc);
  return p;
}

inline SemidiscreteProblem make_nonlinear_problem(std::size_t m, SemidiscreteProblem::ResidualFn residual,
                                                  SemidiscreteProblem::JacobianFn mass_jacobian,
                                                  SemidiscreteProblem::JacobianFn stiffness_jacobian,
                                                  std::optional<DirichletBC> bc = std::nullopt) {
  SemidiscreteProblem p;
  p.m = m;
  p.residual = std::move(residual);
  p.mass_jacobian = std::move(mass_jacobian);
  p.stiffness_jacobian = std::move(stiffness_jacobian);
  p.dirichlet = std::move(bc);
  return p;
}

}  // namespace rkstage
