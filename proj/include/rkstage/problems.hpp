// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "rkstage/bcs.hpp"
#include "rkstage/errors.hpp"
#include "rkstage/semidiscrete.hpp"
#include "rkstage/sparse.hpp"

namespace rkstage {

/// Uniform grid of the unit interval or unit square, vertices numbered
/// lexicographically (x fastest).
class StructuredGrid {
 public:
  StructuredGrid(int dim, int N) : dim_(dim), N_(N) {
    if (dim != 1 && dim != 2) throw Error("grid dimension must be 1 or 2");
    if (N < 2) throw Error("grid needs at least 2 cells per direction");
  }

  int dim() const noexcept { return dim_; }
  int cells_per_direction() const noexcept { return N_; }
  double h() const noexcept { return 1.0 / N_; }
  std::size_t vertices() const noexcept {
    const auto n = static_cast<std::size_t>(N_ + 1);
    return dim_ == 1 ? n : n * n;
  }
  std::size_t cells() const noexcept {
    const auto n = static_cast<std::size_t>(N_);
    return dim_ == 1 ? n : n * n;
  }

  std::size_t vertex(int i, int j = 0) const noexcept {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * static_cast<std::size_t>(N_ + 1);
  }

  std::array<double, 2> coordinates(std::size_t v) const noexcept {
    const auto n = static_cast<std::size_t>(N_ + 1);
    return {static_cast<double>(v % n) * h(), dim_ == 1 ? 0.0 : static_cast<double>(v / n) * h()};
  }

  std::vector<std::size_t> boundary_dofs() const {
    std::vector<std::size_t> out;
    if (dim_ == 1) return {0, static_cast<std::size_t>(N_)};
    for (int j = 0; j <= N_; ++j)
      for (int i = 0; i <= N_; ++i)
        if (i == 0 || j == 0 || i == N_ || j == N_) out.push_back(vertex(i, j));
    return out;
  }

  /// Vertex indices of cell (ci, cj), local order (0,0),(1,0),(0,1),(1,1).
  std::vector<std::size_t> cell_vertices(int ci, int cj = 0) const {
    if (dim_ == 1) return {vertex(ci), vertex(ci + 1)};
    return {vertex(ci, cj), vertex(ci + 1, cj), vertex(ci, cj + 1), vertex(ci + 1, cj + 1)};
  }

 private:
  int dim_;
  int N_;
};

namespace detail {

/// Gauss-Legendre rule on [0, 1] with n = 2 or 4 points.
inline std::pair<std::vector<double>, std::vector<double>> gauss_unit(int n) {
  if (n == 2) {
    const double d = 0.5 / std::sqrt(3.0);
    return {{0.5 - d, 0.5 + d}, {0.5, 0.5}};
  }
  const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
  const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
  return {{0.5 - 0.5 * b, 0.5 - 0.5 * a, 0.5 + 0.5 * a, 0.5 + 0.5 * b},
          {0.5 * wb, 0.5 * wa, 0.5 * wa, 0.5 * wb}};
}

struct QuadPoint {
  double xi, eta, weight;
};

inline std::vector<QuadPoint> reference_rule(int dim, int n) {
  const auto [x, w] = gauss_unit(n);
  std::vector<QuadPoint> q;
  if (dim == 1) {
    for (std::size_t a = 0; a < x.size(); ++a) q.push_back({x[a], 0.0, w[a]});
  } else {
    for (std::size_t b = 0; b < x.size(); ++b)
      for (std::size_t a = 0; a < x.size(); ++a) q.push_back({x[a], x[b], w[a] * w[b]});
  }
  return q;
}

/// Q1 (or P1) shape values and reference gradients at (xi, eta).
struct ShapeEval {
  std::array<double, 4> value{};
  std::array<std::array<double, 2>, 4> grad{};
};

inline ShapeEval shape(int dim, double xi, double eta) {
  ShapeEval s;
  if (dim == 1) {
    s.value = {1.0 - xi, xi, 0.0, 0.0};
    s.grad[0] = {-1.0, 0.0};
    s.grad[1] = {1.0, 0.0};
    return s;
  }
  const double px[2] = {1.0 - xi, xi}, py[2] = {1.0 - eta, eta};
  const double dx[2] = {-1.0, 1.0};
  for (int b = 0; b < 2; ++b)
    for (int a = 0; a < 2; ++a) {
      const int k = a + 2 * b;
      s.value[static_cast<std::size_t>(k)] = px[a] * py[b];
      s.grad[static_cast<std::size_t>(k)] = {dx[a] * py[b], px[a] * dx[b]};
    }
  return s;
}

template <class Visitor>
void for_each_cell(const StructuredGrid& grid, Visitor&& visit) {
  const int N = grid.cells_per_direction();
  if (grid.dim() == 1) {
    for (int i = 0; i < N; ++i) visit(i, 0);
  } else {
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) visit(i, j);
  }
}

}  // namespace detail

struct HeatOperators {
  SparseMatrix mass;
  SparseMatrix stiffness;
  std::vector<std::size_t> boundary;
};

/// Mass and (positive semidefinite) stiffness matrices, 2-point Gauss per direction.
inline HeatOperators assemble_heat(const StructuredGrid& grid) {
  const int dim = grid.dim();
  const double h = grid.h();
  const double jac = dim == 1 ? h : h * h;
  const auto rule = detail::reference_rule(dim, 2);
  const std::size_t nloc = dim == 1 ? 2 : 4;
  std::vector<Triplet> mt, kt;
  detail::for_each_cell(grid, [&](int ci, int cj) {
    const auto verts = grid.cell_vertices(ci, cj);
    for (const auto& q : rule) {
      const auto sh = detail::shape(dim, q.xi, q.eta);
      for (std::size_t a = 0; a < nloc; ++a)
        for (std::size_t b = 0; b < nloc; ++b) {
          const double mass = sh.value[a] * sh.value[b] * q.weight * jac;
          const double stiff = (sh.grad[a][0] * sh.grad[b][0] + sh.grad[a][1] * sh.grad[b][1]) /
                               (h * h) * q.weight * jac;
          mt.push_back({verts[a], verts[b], mass});
          kt.push_back({verts[a], verts[b], stiff});
        }
    }
  });
  const auto n = grid.vertices();
  return {SparseMatrix(n, n, std::move(mt)), SparseMatrix(n, n, std::move(kt)), grid.boundary_dofs()};
}

/// Exact solution of u_t - Laplace(u) = f with its derivatives.
struct ManufacturedSolution {
  int dim = 2;
  std::function<double(double, double, double)> u;
  std::function<double(double, double, double)> u_t;
  std::function<std::array<double, 2>(double, double, double)> grad;
  std::function<double(double, double, double)> f;
};

/// u = exp(-t/10) sin(pi x) cos(pi y) on the unit square.
inline ManufacturedSolution heat_mms_2d() {
  using std::numbers::pi;
  ManufacturedSolution s;
  s.dim = 2;
  s.u = [](double t, double x, double y) { return std::exp(-0.1 * t) * std::sin(pi * x) * std::cos(pi * y); };
  s.u_t = [u = s.u](double t, double x, double y) { return -0.1 * u(t, x, y); };
  s.grad = [](double t, double x, double y) {
    const double e = std::exp(-0.1 * t);
    return std::array<double, 2>{pi * e * std::cos(pi * x) * std::cos(pi * y),
                                 -pi * e * std::sin(pi * x) * std::sin(pi * y)};
  };
  s.f = [u = s.u](double t, double x, double y) { return (2.0 * pi * pi - 0.1) * u(t, x, y); };
  return s;
}

/// u = exp(-t/10) cos(pi x) on the unit interval (nonzero Dirichlet data).
inline ManufacturedSolution heat_mms_1d() {
  using std::numbers::pi;
  ManufacturedSolution s;
  s.dim = 1;
  s.u = [](double t, double x, double) { return std::exp(-0.1 * t) * std::cos(pi * x); };
  s.u_t = [u = s.u](double t, double x, double y) { return -0.1 * u(t, x, y); };
  s.grad = [](double t, double x, double) {
    return std::array<double, 2>{-pi * std::exp(-0.1 * t) * std::sin(pi * x), 0.0};
  };
  s.f = [u = s.u](double t, double x, double y) { return (pi * pi - 0.1) * u(t, x, y); };
  return s;
}

/// (f(t, .), phi_j) with 2-point Gauss per direction.
inline Vector assemble_load(const StructuredGrid& grid, const std::function<double(double, double, double)>& f,
                            double t) {
  const int dim = grid.dim();
  const double h = grid.h();
  const double jac = dim == 1 ? h : h * h;
  const auto rule = detail::reference_rule(dim, 2);
  const std::size_t nloc = dim == 1 ? 2 : 4;
  Vector b = Vector::Zero(static_cast<Eigen::Index>(grid.vertices()));
  detail::for_each_cell(grid, [&](int ci, int cj) {
    const auto verts = grid.cell_vertices(ci, cj);
    for (const auto& q : rule) {
      const auto sh = detail::shape(dim, q.xi, q.eta);
      const double fx = f(t, (ci + q.xi) * h, dim == 1 ? 0.0 : (cj + q.eta) * h);
      for (std::size_t a = 0; a < nloc; ++a)
        b[static_cast<Eigen::Index>(verts[a])] += fx * sh.value[a] * q.weight * jac;
    }
  });
  return b;
}

inline Vector assemble_load(const StructuredGrid& grid, const ManufacturedSolution& mms, double t) {
  return assemble_load(grid, mms.f, t);
}

inline Vector interpolate(const StructuredGrid& grid, const std::function<double(double, double, double)>& u,
                          double t) {
  Vector out(static_cast<Eigen::Index>(grid.vertices()));
  for (std::size_t v = 0; v < grid.vertices(); ++v) {
    const auto x = grid.coordinates(v);
    out[static_cast<Eigen::Index>(v)] = u(t, x[0], x[1]);
  }
  return out;
}

namespace detail {

struct ErrorIntegrals {
  double l2_squared = 0.0;
  double h1_semi_squared = 0.0;
};

inline ErrorIntegrals error_integrals(
    const StructuredGrid& grid, const Vector& u_h, const std::function<double(double, double, double)>& u,
    const std::function<std::array<double, 2>(double, double, double)>& grad, double t) {
  if (static_cast<std::size_t>(u_h.size()) != grid.vertices())
    throw DimensionMismatch("error norm: vector does not match grid");
  const int dim = grid.dim();
  const double h = grid.h();
  const double jac = dim == 1 ? h : h * h;
  const auto rule = reference_rule(dim, 4);
  const std::size_t nloc = dim == 1 ? 2 : 4;
  ErrorIntegrals e;
  for_each_cell(grid, [&](int ci, int cj) {
    const auto verts = grid.cell_vertices(ci, cj);
    for (const auto& q : rule) {
      const auto sh = shape(dim, q.xi, q.eta);
      double uh = 0.0, gx = 0.0, gy = 0.0;
      for (std::size_t a = 0; a < nloc; ++a) {
        const double coef = u_h[static_cast<Eigen::Index>(verts[a])];
        uh += coef * sh.value[a];
        gx += coef * sh.grad[a][0] / h;
        gy += coef * sh.grad[a][1] / h;
      }
      const double x = (ci + q.xi) * h, y = dim == 1 ? 0.0 : (cj + q.eta) * h;
      const double diff = uh - u(t, x, y);
      e.l2_squared += diff * diff * q.weight * jac;
      if (grad) {
        const auto g = grad(t, x, y);
        e.h1_semi_squared += ((gx - g[0]) * (gx - g[0]) + (gy - g[1]) * (gy - g[1])) * q.weight * jac;
      }
    }
  });
  return e;
}

}  // namespace detail

/// ||u_h - u||_{L2} with 4-point Gauss per direction.
inline double l2_error(const StructuredGrid& grid, const Vector& u_h,
                       const std::function<double(double, double, double)>& u, double t) {
  return std::sqrt(detail::error_integrals(grid, u_h, u, nullptr, t).l2_squared);
}

/// Full H1 error: sqrt(||e||_{L2}^2 + |e|_{H1}^2).
inline double h1_error(const StructuredGrid& grid, const Vector& u_h, const ManufacturedSolution& mms,
                       double t) {
  const auto e = detail::error_integrals(grid, u_h, mms.u, mms.grad, t);
  return std::sqrt(e.l2_squared + e.h1_semi_squared);
}

/// L2 norm of a finite element function.
inline double l2_norm(const StructuredGrid& grid, const Vector& u_h) {
  return l2_error(grid, u_h, [](double, double, double) { return 0.0; }, 0.0);
}

/// Heat problem on a grid plus its initial state.
struct ModelProblem {
  StructuredGrid grid;
  SemidiscreteProblem problem;
  Vector u0;
};

/// Manufactured-solution heat problem with Dirichlet data from the exact
/// solution on every boundary vertex.
inline ModelProblem mms_heat_problem(const StructuredGrid& grid, const ManufacturedSolution& mms) {
  if (grid.dim() != mms.dim) throw Error("manufactured solution dimension does not match grid");
  auto ops = assemble_heat(grid);
  DirichletBC bc;
  bc.dofs = ops.boundary;
  bc.g = [grid, u = mms.u](double t, std::size_t d) {
    const auto x = grid.coordinates(d);
    return u(t, x[0], x[1]);
  };
  bc.g_dot = [grid, ut = mms.u_t](double t, std::size_t d) {
    const auto x = grid.coordinates(d);
    return ut(t, x[0], x[1]);
  };
  auto load = [grid, f = mms.f](double t) { return assemble_load(grid, f, t); };
  return {grid, make_linear_problem(std::move(ops.mass), std::move(ops.stiffness), load, std::move(bc)),
          interpolate(grid, mms.u, 0.0)};
}

/// 1D heat on ten P1 intervals, u(0, x) = 0, u = 1 at both ends for t > 0.
inline ModelProblem incompatible_heat_1d(int intervals = 10) {
  StructuredGrid grid(1, intervals);
  auto ops = assemble_heat(grid);
  DirichletBC bc;
  bc.dofs = ops.boundary;
  bc.g = [](double, std::size_t) { return 1.0; };
  bc.g_dot = [](double, std::size_t) { return 0.0; };
  return {grid, make_linear_problem(std::move(ops.mass), std::move(ops.stiffness), nullptr, std::move(bc)),
          Vector::Zero(static_cast<Eigen::Index>(grid.vertices()))};
}

/// Scalar ODE y' = g(t, y) posed as F = y' - g(t, y).
struct OdeTestProblem {
  std::string name;
  SemidiscreteProblem problem;
  Vector y0;
  double t0 = 0.0;
  std::function<double(double)> exact;
};

inline SparseMatrix scalar_matrix(double v) {
  return SparseMatrix(1, 1, {{0, 0, v}});
}

/// y' = lambda y, y(0) = 1.
inline OdeTestProblem dahlquist(double lambda = -1.0) {
  OdeTestProblem p;
  p.name = "dahlquist";
  p.problem = make_linear_problem(scalar_matrix(1.0), scalar_matrix(-lambda), nullptr);
  p.y0 = Vector::Constant(1, 1.0);
  p.exact = [lambda](double t) { return std::exp(lambda * t); };
  return p;
}

/// y' = lambda (y - sin t) + cos t, y(0) = 0; exact solution sin t.
inline OdeTestProblem prothero_robinson(double lambda = -1e4) {
  OdeTestProblem p;
  p.name = "prothero-robinson";
  p.problem = make_linear_problem(scalar_matrix(1.0), scalar_matrix(-lambda), [lambda](double t) {
    return Vector(Vector::Constant(1, std::cos(t) - lambda * std::sin(t)));
  });
  p.y0 = Vector::Constant(1, 0.0);
  p.exact = [](double t) { return std::sin(t); };
  return p;
}

/// y' = y^2, y(0) = 1; exact solution 1 / (1 - t).
inline OdeTestProblem riccati() {
  OdeTestProblem p;
  p.name = "riccati";
  p.problem = make_nonlinear_problem(
      1,
      [](double, const Vector& u, const Vector& udot) { return Vector(udot - u.cwiseProduct(u)); },
      [](double, const Vector&, const Vector&) { return scalar_matrix(1.0); },
      [](double, const Vector& u, const Vector&) { return scalar_matrix(-2.0 * u[0]); });
  p.y0 = Vector::Constant(1, 1.0);
  p.exact = [](double t) { return 1.0 / (1.0 - t); };
  return p;
}

/// y' = 0.
inline OdeTestProblem zero_dynamics() {
  OdeTestProblem p;
  p.name = "zero";
  p.problem = make_linear_problem(scalar_matrix(1.0), scalar_matrix(0.0), nullptr);
  p.y0 = Vector::Constant(1, 1.0);
  p.exact = [](double) { return 1.0; };
  return p;
}

inline std::vector<OdeTestProblem> ode_suite() {
  return {dahlquist(-1.0), prothero_robinson(-1e4), riccati()};
}

}  // namespace rkstage
