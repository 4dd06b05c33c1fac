// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rkstage/errors.hpp"
#include "rkstage/sparse.hpp"

namespace rkstage {

/// Anything with `size()` and `apply(x, y)` computing y = Op x.
template <class T>
concept LinearOperator = requires(const T& op, const Vector& x, Vector& y) {
  { op.size() } -> std::convertible_to<std::size_t>;
  op.apply(x, y);
};

/// Wraps a callable as a LinearOperator.
class FunctionOperator {
 public:
  FunctionOperator(std::size_t n, std::function<void(const Vector&, Vector&)> f)
      : n_(n), f_(std::move(f)) {}
  std::size_t size() const noexcept { return n_; }
  void apply(const Vector& x, Vector& y) const { f_(x, y); }

 private:
  std::size_t n_;
  std::function<void(const Vector&, Vector&)> f_;
};

class IdentityOperator {
 public:
  explicit IdentityOperator(std::size_t n) : n_(n) {}
  std::size_t size() const noexcept { return n_; }
  void apply(const Vector& x, Vector& y) const { y = x; }

 private:
  std::size_t n_;
};

class SparseOperator {
 public:
  explicit SparseOperator(const SparseMatrix& A) : A_(&A) {}
  std::size_t size() const noexcept { return A_->rows(); }
  void apply(const Vector& x, Vector& y) const { A_->multiply(x, y); }

 private:
  const SparseMatrix* A_;
};

enum class PreconditionerSide { Right, Left };

struct KrylovSettings {
  double rtol = 1e-8;
  double atol = 1e-50;
  int restart = 50;
  int maxit = 500;
  PreconditionerSide side = PreconditionerSide::Right;
};

struct KrylovResult {
  Vector x;
  /// Preconditioned operator applications.
  int iterations = 0;
  /// Residual norm estimate after each iteration; entry 0 is the initial residual.
  std::vector<double> history;
  bool converged = false;
};

namespace detail {

inline void check_settings(const KrylovSettings& s) {
  if (!(s.rtol > 0.0) || !(s.atol > 0.0) || s.restart < 1 || s.maxit < 1)
    throw Error("invalid Krylov settings");
}

struct Givens {
  double c = 1.0;
  double s = 0.0;
};

/// Restarted GMRES core. `precond_apply(v, z)` is applied before the
/// operator (flexible, right side) or after it (left side).
template <class ApplyOp, class ApplyPc>
KrylovResult gmres_core(std::size_t n, ApplyOp&& apply_op, ApplyPc&& apply_pc, bool right,
                        const Vector& b, const KrylovSettings& settings, Vector x) {
  check_settings(settings);
  if (static_cast<std::size_t>(b.size()) != n) throw DimensionMismatch("fgmres: rhs size");
  if (!b.allFinite()) throw Error("fgmres: non-finite right-hand side");
  if (x.size() == 0) x = Vector::Zero(static_cast<Eigen::Index>(n));

  KrylovResult result;
  const int restart = settings.restart;
  const auto N = static_cast<Eigen::Index>(n);

  Vector tmp(N), w(N);
  auto residual = [&](const Vector& xk, Vector& r) {
    apply_op(xk, tmp);
    r = b - tmp;
    if (!right) {
      apply_pc(r, w);
      r = w;
    }
  };

  double target = 0.0;
  {
    Vector rb = b;
    if (!right) apply_pc(b, rb);
    target = std::max(settings.rtol * rb.norm(), settings.atol);
  }
  const double breakdown_tol = 1e-14 * b.norm();

  std::vector<Vector> V(static_cast<std::size_t>(restart) + 1, Vector(N));
  std::vector<Vector> Z(right ? static_cast<std::size_t>(restart) : 0, Vector(N));
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
  std::vector<Givens> rot(static_cast<std::size_t>(restart));
  Vector g(restart + 1);

  Vector r(N);
  residual(x, r);
  double beta = r.norm();
  result.history.push_back(beta);

  while (true) {
    if (beta <= target) {
      result.converged = true;
      break;
    }
    if (result.iterations >= settings.maxit) break;

    V[0] = r / beta;
    g.setZero();
    g[0] = beta;
    H.setZero();
    int j = 0;
    bool lucky = false;
    for (; j < restart && result.iterations < settings.maxit; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (right) {
        apply_pc(V[ju], Z[ju]);
        apply_op(Z[ju], w);
      } else {
        apply_op(V[ju], tmp);
        apply_pc(tmp, w);
      }
      ++result.iterations;

      for (int i = 0; i <= j; ++i) {
        H(i, j) = w.dot(V[static_cast<std::size_t>(i)]);
        w -= H(i, j) * V[static_cast<std::size_t>(i)];
      }
      H(j + 1, j) = w.norm();
      lucky = H(j + 1, j) < breakdown_tol;
      if (!lucky) V[ju + 1] = w / H(j + 1, j);

      for (int i = 0; i < j; ++i) {
        const auto& G = rot[static_cast<std::size_t>(i)];
        const double h0 = H(i, j), h1 = H(i + 1, j);
        H(i, j) = G.c * h0 + G.s * h1;
        H(i + 1, j) = -G.s * h0 + G.c * h1;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      Givens& G = rot[ju];
      G.c = denom == 0.0 ? 1.0 : H(j, j) / denom;
      G.s = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[j + 1] = -G.s * g[j];
      g[j] = G.c * g[j];

      result.history.push_back(std::abs(g[j + 1]));
      if (std::abs(g[j + 1]) <= target || lucky) {
        ++j;
        break;
      }
    }

    // Back substitution on the triangularized Hessenberg system.
    Vector y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    for (int i = 0; i < j; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      if (right) x += y[i] * Z[iu]; else x += y[i] * V[iu];
    }

    residual(x, r);
    beta = r.norm();
    if (lucky && beta > target) {
      // Breakdown without convergence; restart from the true residual.
      result.history.back() = beta;
    }
    if (beta <= target) {
      result.converged = true;
      break;
    }
  }

  result.x = std::move(x);
  if (!result.converged)
    throw NonConvergence("fgmres: no convergence after " + std::to_string(result.iterations) +
                             " iterations",
                         result.history, result.iterations);
  return result;
}

}  // namespace detail

/// Restarted flexible GMRES. With right preconditioning the Krylov space is
/// built on op * pc; convergence is ||b - op x|| <= max(rtol ||b||, atol).
template <LinearOperator Op, LinearOperator Pc>
KrylovResult fgmres(const Op& op, const Pc* pc, const Vector& b, const KrylovSettings& settings,
                    Vector x0 = Vector()) {
  const std::size_t n = op.size();
  if (pc && pc->size() != n) throw DimensionMismatch("fgmres: preconditioner size");
  auto apply_op = [&](const Vector& in, Vector& out) { op.apply(in, out); };
  auto apply_pc = [&](const Vector& in, Vector& out) {
    if (pc) pc->apply(in, out); else out = in;
  };
  return detail::gmres_core(n, apply_op, apply_pc, settings.side == PreconditionerSide::Right, b,
                            settings, std::move(x0));
}

template <LinearOperator Op>
KrylovResult fgmres(const Op& op, const Vector& b, const KrylovSettings& settings,
                    Vector x0 = Vector()) {
  return fgmres(op, static_cast<const IdentityOperator*>(nullptr), b, settings, std::move(x0));
}

}  // namespace rkstage
