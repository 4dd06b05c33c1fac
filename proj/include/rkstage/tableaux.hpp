// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rkstage/errors.hpp"

namespace rkstage {

using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

namespace tolerances {
inline constexpr double structural = 1e-12;
inline constexpr double root = 1e-14;
inline constexpr double pivot = 1e-14;
}  // namespace tolerances

enum class StageOrderKind { Classical, Weak };

/// Butcher coefficients (A, b, c) of an s-stage Runge-Kutta method.
///
/// Immutable once built; construction validates shapes and consistency
/// (sum of weights equal to one within `consistency_tol`).
class ButcherTableau {
 public:
  ButcherTableau(std::string name, DenseMatrix A, DenseVector b, DenseVector c,
                 int formal_order, int stage_order,
                 StageOrderKind stage_order_kind = StageOrderKind::Classical,
                 double consistency_tol = tolerances::structural)
      : name_(std::move(name)),
        A_(std::move(A)),
        b_(std::move(b)),
        c_(std::move(c)),
        formal_order_(formal_order),
        stage_order_(stage_order),
        stage_order_kind_(stage_order_kind) {
    const auto s = A_.rows();
    if (s < 1 || A_.cols() != s || b_.size() != s || c_.size() != s)
      throw DimensionMismatch("tableau " + name_ + ": A must be s x s and b, c of length s");
    if (std::abs(b_.sum() - 1.0) > consistency_tol)
      throw Error("tableau " + name_ + ": weights do not sum to one");
  }

  int stages() const noexcept { return static_cast<int>(A_.rows()); }
  const DenseMatrix& A() const noexcept { return A_; }
  const DenseVector& b() const noexcept { return b_; }
  const DenseVector& c() const noexcept { return c_; }
  int formal_order() const noexcept { return formal_order_; }
  int stage_order() const noexcept { return stage_order_; }
  StageOrderKind stage_order_kind() const noexcept { return stage_order_kind_; }
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  DenseMatrix A_;
  DenseVector b_;
  DenseVector c_;
  int formal_order_;
  int stage_order_;
  StageOrderKind stage_order_kind_;
};

struct LduFactors {
  DenseMatrix L;  ///< unit lower triangular
  DenseVector D;
  DenseMatrix U;  ///< unit upper triangular
};

struct AdditiveSplit {
  DenseMatrix L_strict;
  DenseVector D_diag;
  DenseMatrix U_strict;
};

namespace detail {

/// Monomial coefficients (ascending powers) of d^{s-1}/dx^{s-1} [x^{s-1}(x-1)^s].
inline std::vector<double> radau_node_polynomial(int s) {
  // x^{s-1} (x-1)^s = sum_k binom(s,k) (-1)^{s-k} x^{k+s-1}
  std::vector<double> p(2 * s, 0.0);
  double binom = 1.0;
  for (int k = 0; k <= s; ++k) {
    p[k + s - 1] = binom * (((s - k) % 2) ? -1.0 : 1.0);
    binom = binom * (s - k) / (k + 1);
  }
  for (int d = 0; d < s - 1; ++d) {
    std::vector<double> q(p.size() - 1);
    for (std::size_t i = 1; i < p.size(); ++i) q[i - 1] = p[i] * static_cast<double>(i);
    p = std::move(q);
  }
  return p;
}

inline double eval_poly(const std::vector<double>& p, double x) {
  double v = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) v = v * x + *it;
  return v;
}

inline double eval_poly_derivative(const std::vector<double>& p, double x) {
  double v = 0.0;
  for (std::size_t i = p.size(); i-- > 1;) v = v * x + p[i] * static_cast<double>(i);
  return v;
}

/// Real roots of a polynomial from the eigenvalues of its companion matrix,
/// each polished by Newton.
inline std::vector<double> real_roots(const std::vector<double>& p) {
  const int n = static_cast<int>(p.size()) - 1;
  if (n == 1) return {-p[0] / p[1]};
  DenseMatrix companion = DenseMatrix::Zero(n, n);
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) companion(i, n - 1) = -p[i] / p[n];
  Eigen::EigenSolver<DenseMatrix> es(companion, false);
  std::vector<double> roots;
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()[i].real();
    for (int it = 0; it < 50; ++it) {
      const double f = eval_poly(p, x);
      if (std::abs(f) < tolerances::root) break;
      const double dx = f / eval_poly_derivative(p, x);
      x -= dx;
      if (std::abs(dx) < 1e-17) break;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

/// Gauss-Legendre nodes/weights on [0, 1] (Golub-Welsch).
inline std::pair<DenseVector, DenseVector> gauss_legendre_unit(int n) {
  DenseMatrix J = DenseMatrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(J);
  DenseVector x = (es.eigenvalues().array() + 1.0) / 2.0;
  DenseVector w = es.eigenvectors().row(0).transpose().array().square();
  return {x, w};
}

inline double lagrange_basis(const DenseVector& nodes, int j, double x) {
  double v = 1.0;
  for (int k = 0; k < nodes.size(); ++k)
    if (k != j) v *= (x - nodes[k]) / (nodes[j] - nodes[k]);
  return v;
}

}  // namespace detail

/// s-stage RadauIIA collocation method, 1 <= s <= 5.
inline ButcherTableau radau_iia(int s) {
  if (s < 1 || s > 5) throw UnsupportedStageCount("radau-iia", s);
  const auto roots = detail::real_roots(detail::radau_node_polynomial(s));
  DenseVector c(s);
  for (int i = 0; i < s; ++i) c[i] = roots[i];
  c[s - 1] = 1.0;

  // Lagrange basis has degree s-1; s+1 Gauss points integrate it exactly.
  const auto [qx, qw] = detail::gauss_legendre_unit(s + 1);
  auto integrate = [&](int j, double upper) {
    double sum = 0.0;
    for (int q = 0; q < qx.size(); ++q)
      sum += qw[q] * detail::lagrange_basis(c, j, upper * qx[q]);
    return upper * sum;
  };
  DenseMatrix A(s, s);
  DenseVector b(s);
  for (int j = 0; j < s; ++j) {
    b[j] = integrate(j, 1.0);
    for (int i = 0; i < s; ++i) A(i, j) = integrate(j, c[i]);
  }
  // Stiffly accurate by construction (c_s = 1); make it exact in floating point.
  b = A.row(s - 1).transpose();
  return ButcherTableau("RadauIIA(" + std::to_string(s) + ")", std::move(A), std::move(b),
                        std::move(c), 2 * s - 1, s);
}

inline ButcherTableau lobatto_iiic(int s) {
  if (s == 2) {
    DenseMatrix A(2, 2);
    A << 0.5, -0.5, 0.5, 0.5;
    DenseVector b(2), c(2);
    b << 0.5, 0.5;
    c << 0.0, 1.0;
    return ButcherTableau("LobattoIIIC(2)", A, b, c, 2, 1);
  }
  if (s == 3) {
    DenseMatrix A(3, 3);
    A << 1.0 / 6, -1.0 / 3, 1.0 / 6,
         1.0 / 6, 5.0 / 12, -1.0 / 12,
         1.0 / 6, 2.0 / 3, 1.0 / 6;
    DenseVector b = A.row(2).transpose();
    DenseVector c(3);
    c << 0.0, 0.5, 1.0;
    return ButcherTableau("LobattoIIIC(3)", A, b, c, 4, 2);
  }
  throw UnsupportedStageCount("lobatto-iiic", s);
}

/// Root of x^3 - 3x^2 + 3x/2 - 1/6 in [1/6, 1/2] by safeguarded Newton.
inline double alexander_parameter() {
  auto p = [](double x) { return ((x - 3.0) * x + 1.5) * x - 1.0 / 6.0; };
  auto dp = [](double x) { return (3.0 * x - 6.0) * x + 1.5; };
  double lo = 1.0 / 6.0, hi = 0.5;
  const bool increasing = p(lo) < p(hi);
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = p(x);
    if (std::abs(f) < tolerances::root) break;
    if ((f < 0.0) == increasing) lo = x; else hi = x;
    double next = x - f / dp(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
  }
  return x;
}

/// Alexander's three-stage L-stable DIRK.
inline ButcherTableau alexander_dirk() {
  const double x = alexander_parameter();
  const double y = -1.5 * x * x + 4.0 * x - 0.25;
  const double z = 1.0 - x - y;
  DenseMatrix A(3, 3);
  A << x, 0.0, 0.0,
       (1.0 - x) / 2.0, x, 0.0,
       y, z, x;
  DenseVector b = A.row(2).transpose();
  DenseVector c(3);
  c << x, (1.0 + x) / 2.0, 1.0;
  return ButcherTableau("Alexander", A, b, c, 3, 1);
}

/// Four-stage DIRK of order 3 and weak stage order 3, stored to 8 decimals.
/// a_31 carries a negative sign so that row 3 sums to c_3.
inline ButcherTableau wsodirk433() {
  DenseMatrix A(4, 4);
  A << 0.13756544, 0.0, 0.0, 0.0,
       0.56695123, 0.23483889, 0.0, 0.0,
       -1.08354073, 2.96618224, 0.44915522, 0.0,
       0.59761292, -0.43420998, -0.05305815, 0.88965521;
  DenseVector b = A.row(3).transpose();
  DenseVector c(4);
  c << 0.13756544, 0.80179012, 2.33179673, 1.0;
  return ButcherTableau("WSODIRK433", A, b, c, 3, 3, StageOrderKind::Weak, 1e-7);
}

/// WSODIRK433 with a_31 = +1.08354073. Row 3 then fails the row-sum
/// condition and the method drops to first order; kept for comparison,
/// not for stepping.
inline ButcherTableau wsodirk433_as_printed() {
  const auto ref = wsodirk433();
  DenseMatrix A = ref.A();
  A(2, 0) = 1.08354073;
  return ButcherTableau("WSODIRK433 (as printed)", A, ref.b(), ref.c(), 1, 1, StageOrderKind::Weak, 1e-7);
}

/// Parses "radau-iia:S", "lobatto-iiic:S", "alexander", "wsodirk433".
inline ButcherTableau tableau_from_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string family = spec.substr(0, colon);
  int stages = -1;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      stages = std::stoi(spec.substr(colon + 1), &used);
      if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error("malformed tableau spec '" + spec + "'");
    }
  }
  if (family == "radau-iia") return radau_iia(colon == std::string::npos ? 2 : stages);
  if (family == "lobatto-iiic") return lobatto_iiic(colon == std::string::npos ? 2 : stages);
  if (family == "alexander") {
    if (colon != std::string::npos && stages != 3) throw UnsupportedStageCount(family, stages);
    return alexander_dirk();
  }
  if (family == "wsodirk433") {
    if (colon != std::string::npos && stages != 4) throw UnsupportedStageCount(family, stages);
    return wsodirk433();
  }
  throw Error("unknown tableau family '" + family + "'");
}

/// Doolittle elimination without pivoting: A = L diag(D) U.
inline LduFactors ldu_factor(const ButcherTableau& tab) {
  const int s = tab.stages();
  DenseMatrix L = DenseMatrix::Identity(s, s);
  DenseMatrix W = tab.A();
  for (int k = 0; k < s; ++k) {
    if (std::abs(W(k, k)) < tolerances::pivot)
      throw SingularFactorization(
          static_cast<std::size_t>(k),
          "LDU factorization of " + tab.name() + " hit a zero pivot at stage " +
              std::to_string(k + 1));
    for (int i = k + 1; i < s; ++i) {
      L(i, k) = W(i, k) / W(k, k);
      W.row(i) -= L(i, k) * W.row(k);
      W(i, k) = 0.0;
    }
  }
  DenseVector D = W.diagonal();
  DenseMatrix U = W;
  for (int i = 0; i < s; ++i) {
    U.row(i) /= D[i];
    U(i, i) = 1.0;
  }
  return {std::move(L), std::move(D), std::move(U)};
}

inline AdditiveSplit additive_split(const ButcherTableau& tab) {
  const DenseMatrix& A = tab.A();
  return {A.triangularView<Eigen::StrictlyLower>(), A.diagonal(),
          A.triangularView<Eigen::StrictlyUpper>()};
}

inline bool is_stiffly_accurate(const ButcherTableau& tab, double tol = tolerances::structural) {
  return (tab.b().transpose() - tab.A().row(tab.stages() - 1)).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_lower_triangular(const ButcherTableau& tab, double tol = tolerances::structural) {
  const DenseMatrix upper = tab.A().triangularView<Eigen::StrictlyUpper>();
  return upper.cwiseAbs().maxCoeff() <= tol;
}

/// LU with partial pivoting; invertible when the smallest pivot exceeds tol*||A||.
inline bool is_invertible(const ButcherTableau& tab, double tol = tolerances::structural) {
  const DenseMatrix& A = tab.A();
  const double norm = A.lpNorm<Eigen::Infinity>();
  if (norm == 0.0) return false;
  Eigen::PartialPivLU<DenseMatrix> lu(A);
  return lu.matrixLU().diagonal().cwiseAbs().minCoeff() > tol * norm;
}

struct OrderResiduals {
  /// |sum_i b_i c_i^{k-1} - 1/k| for k = 1..p
  std::vector<double> quadrature;
  /// stage(i, k-1) = |sum_j a_ij c_j^{k-1} - c_i^k / k| for k = 1..q
  DenseMatrix stage;

  double max_quadrature() const {
    return quadrature.empty() ? 0.0 : *std::max_element(quadrature.begin(), quadrature.end());
  }
  double max_stage() const { return stage.size() == 0 ? 0.0 : stage.maxCoeff(); }
};

/// B(p) and C(q) residuals; q defaults to the tableau's stage order.
inline OrderResiduals order_condition_residuals(const ButcherTableau& tab, int p, int q = -1) {
  if (q < 0) q = tab.stage_order();
  const int s = tab.stages();
  OrderResiduals r;
  for (int k = 1; k <= p; ++k) {
    double sum = 0.0;
    for (int i = 0; i < s; ++i) sum += tab.b()[i] * std::pow(tab.c()[i], k - 1);
    r.quadrature.push_back(std::abs(sum - 1.0 / k));
  }
  r.stage = DenseMatrix::Zero(s, q);
  for (int k = 1; k <= q; ++k)
    for (int i = 0; i < s; ++i) {
      double sum = 0.0;
      for (int j = 0; j < s; ++j) sum += tab.A()(i, j) * std::pow(tab.c()[j], k - 1);
      r.stage(i, k - 1) = std::abs(sum - std::pow(tab.c()[i], k) / k);
    }
  return r;
}

/// Aligned plain-text Butcher array.
inline std::string format_tableau(const ButcherTableau& tab) {
  const int s = tab.stages();
  auto cell = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "% .15f", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << tab.name() << '\n';
  for (int i = 0; i < s; ++i) {
    os << cell(tab.c()[i]) << " |";
    for (int j = 0; j < s; ++j) os << ' ' << cell(tab.A()(i, j));
    os << '\n';
  }
  os << std::string(18, '-') << "-+" << std::string(static_cast<std::size_t>(s) * 19, '-') << '\n';
  os << std::string(18, ' ') << " |";
  for (int j = 0; j < s; ++j) os << ' ' << cell(tab.b()[j]);
  os << '\n';
  return os.str();
}

/// CSV block: header "stage,c,a_1..a_s", one row per stage, then a "b" row.
inline std::string tableau_to_csv(const ButcherTableau& tab) {
  const int s = tab.stages();
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "stage,c";
  for (int j = 1; j <= s; ++j) os << ",a_" << j;
  os << '\n';
  for (int i = 0; i < s; ++i) {
    os << i + 1 << ',' << num(tab.c()[i]);
    for (int j = 0; j < s; ++j) os << ',' << num(tab.A()(i, j));
    os << '\n';
  }
  os << "b,";
  for (int j = 0; j < s; ++j) os << ',' << num(tab.b()[j]);
  os << '\n';
  return os.str();
}

}  // namespace rkstage
