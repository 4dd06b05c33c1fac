// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rkstage/bcs.hpp"
#include "rkstage/constraints.hpp"
#include "rkstage/errors.hpp"
#include "rkstage/formulation.hpp"
#include "rkstage/kronecker.hpp"
#include "rkstage/krylov.hpp"
#include "rkstage/precond.hpp"
#include "rkstage/semidiscrete.hpp"
#include "rkstage/tableaux.hpp"

namespace rkstage {

struct NewtonSettings {
  double rtol = 1e-10;
  double atol = 1e-12;
  int maxit = 50;
};

struct StepReport {
  int newton_iters = 0;
  /// Total Krylov iterations over all linear solves of the step.
  int krylov_iters = 0;
  int linear_solves = 0;
  double final_residual = 0.0;
  /// Stage residual norm before each Newton update and after the last one.
  std::vector<double> newton_history;
};

/// A step failed; carries what was done before the failure.
class StepFailure : public Error {
 public:
  StepFailure(const std::string& what, StepReport report) : Error(what), report_(std::move(report)) {}
  const StepReport& report() const noexcept { return report_; }

 private:
  StepReport report_;
};

class AdvanceError : public Error {
 public:
  AdvanceError(const std::string& what, std::size_t completed) : Error(what), completed_(completed) {}
  /// Steps completed before the failing one.
  std::size_t completed_steps() const noexcept { return completed_; }

 private:
  std::size_t completed_;
};

struct StepperOptions {
  StageFormulation formulation = StageFormulation::StageDerivativeAI;
  BcMethod bc_method = BcMethod::DAE;
  KrylovSettings krylov{};
  std::optional<PreconditionerKind> pc_kind = PreconditionerKind::RanaLD;
  NewtonSettings newton{};
  /// Start linear stage solves from the previous step's stages.
  bool warm_start = false;
};

struct LinearStageSystem {
  KroneckerStageOperator op;
  Vector rhs;
};

/// Coupled stage system of a linear problem M u' + K u = f(t).
///
/// AI: (I (x) M + dt A (x) K) k = f_i - K u^n.
/// IA: (A^{-1} (x) M + dt I (x) K) w = f_i - K u^n, with w = (A (x) I) k.
inline LinearStageSystem assemble_linear_stage_system(const SemidiscreteProblem& problem,
                                                      const ButcherTableau& tab, double t, double dt,
                                                      const Vector& u_n, Splitting form) {
  if (!problem.is_linear()) throw FormulationError("linear stage system needs a linear problem");
  if (static_cast<std::size_t>(u_n.size()) != problem.m) throw DimensionMismatch("state size");
  const int s = tab.stages();
  const auto m = static_cast<Eigen::Index>(problem.m);
  DenseMatrix C1, C2;
  if (form == Splitting::AI) {
    C1 = DenseMatrix::Identity(s, s);
    C2 = tab.A();
  } else {
    if (!is_invertible(tab)) throw FormulationError("IA splitting requires an invertible Butcher matrix");
    C1 = tab.A().inverse();
    C2 = DenseMatrix::Identity(s, s);
  }
  const Vector Ku = spmv(*problem.stiffness, u_n);
  Vector rhs(s * m);
  for (int i = 0; i < s; ++i) rhs.segment(i * m, m) = problem.load(t + tab.c()[i] * dt) - Ku;
  return {KroneckerStageOperator(std::move(C1), std::move(C2), problem.mass, problem.stiffness, dt),
          std::move(rhs)};
}

/// Stage-value system: (A^{-1} (x) M + dt I (x) K) Y = dt f_i + (A^{-1} 1)_i M u^n.
inline LinearStageSystem assemble_stage_value_system(const SemidiscreteProblem& problem,
                                                     const ButcherTableau& tab, double t, double dt,
                                                     const Vector& u_n) {
  if (!problem.is_linear()) throw FormulationError("linear stage system needs a linear problem");
  if (!is_invertible(tab)) throw FormulationError("stage-value form requires an invertible Butcher matrix");
  const int s = tab.stages();
  const auto m = static_cast<Eigen::Index>(problem.m);
  DenseMatrix Ainv = tab.A().inverse();
  const DenseVector rowsums = Ainv.rowwise().sum();
  const Vector Mu = spmv(*problem.mass, u_n);
  Vector rhs(s * m);
  for (int i = 0; i < s; ++i)
    rhs.segment(i * m, m) = dt * problem.load(t + tab.c()[i] * dt) + rowsums[i] * Mu;
  return {KroneckerStageOperator(std::move(Ainv), DenseMatrix::Identity(s, s), problem.mass,
                                 problem.stiffness, dt),
          std::move(rhs)};
}

/// Preconditioner wrapping an exact factorization of a single block.
class BlockSolvePreconditioner {
 public:
  explicit BlockSolvePreconditioner(const BlockFactorization& f) : f_(&f) {}
  std::size_t size() const noexcept { return f_->size(); }
  void apply(const Vector& r, Vector& z) const { f_->solve(r, z); }

 private:
  const BlockFactorization* f_;
};

/// Runge-Kutta stepper for one trajectory of a semidiscrete problem.
///
/// Time is tracked as t_base + n * dt so long runs do not accumulate
/// rounding from repeated addition.
class TimeStepper {
 public:
  TimeStepper(ButcherTableau tableau, double dt, double t0, Vector u0, StepperOptions options = {})
      : tab_(std::move(tableau)), opts_(std::move(options)), dt_(dt), t_base_(t0), u_(std::move(u0)) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw Error("time step must be finite and nonnegative");
    if (!u_.allFinite()) throw Error("initial state must be finite");
    const auto f = opts_.formulation;
    if ((f == StageFormulation::StageDerivativeIA || f == StageFormulation::StageValue) && !is_invertible(tab_))
      throw FormulationError(to_string(f) + " requires an invertible Butcher matrix (" + tab_.name() + ")");
    if (f == StageFormulation::Dirk && !is_lower_triangular(tab_))
      throw FormulationError("DIRK stepping requires a lower-triangular Butcher matrix (" + tab_.name() + ")");
  }

  const ButcherTableau& tableau() const noexcept { return tab_; }
  const StepperOptions& options() const noexcept { return opts_; }
  const Vector& solution() const noexcept { return u_; }
  double dt() const noexcept { return dt_; }
  double time() const noexcept { return t_base_ + static_cast<double>(steps_) * dt_; }
  std::size_t steps_since_dt_change() const noexcept { return steps_; }
  /// Stacked stage unknowns (k, w or Y per the formulation) of the last coupled step.
  const Vector& last_stages() const noexcept { return last_stages_; }

  /// Changing dt rebases the clock and drops cached factorizations.
  void set_dt(double dt) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw Error("time step must be finite and nonnegative");
    if (dt == dt_) return;
    t_base_ = time();
    steps_ = 0;
    dt_ = dt;
    coupled_pc_.reset();
    dirk_blocks_.clear();
  }

  /// Number of times the cached coupled preconditioner was (re)built.
  int preconditioner_builds() const noexcept { return pc_builds_; }

  /// Builds cached factorizations for a linear problem ahead of the first step.
  void prepare(const SemidiscreteProblem& problem) {
    if (!problem.is_linear() || !opts_.pc_kind) return;
    check_state(problem);
    const ConstrainedDofs dofs = constrained_dofs(problem);
    if (opts_.formulation != StageFormulation::Dirk) {
      coupled_preconditioner(problem, dofs);
      return;
    }
    for (int i = 0; i < tab_.stages(); ++i) dirk_block(problem, i, dofs);
  }

  /// Dispatches on formulation and problem linearity.
  StepReport step(const SemidiscreteProblem& problem) {
    if (opts_.formulation == StageFormulation::Dirk) return step_dirk(problem);
    return problem.is_linear() ? step_linear(problem) : step_newton(problem);
  }

  StepReport step_linear(const SemidiscreteProblem& problem) {
    if (!problem.is_linear()) throw FormulationError("step_linear needs a linear problem");
    if (opts_.formulation == StageFormulation::Dirk) return step_dirk(problem);
    check_state(problem);
    const int s = tab_.stages();
    const auto m = static_cast<Eigen::Index>(problem.m);
    const double t = time();
    const auto form = opts_.formulation;

    LinearStageSystem sys = form == StageFormulation::StageValue
                                ? assemble_stage_value_system(problem, tab_, t, dt_, u_)
                                : assemble_linear_stage_system(problem, tab_, t, dt_, u_, splitting());
    const ConstrainedDofs dofs = constrained_dofs(problem);
    const DenseMatrix values = boundary_values(problem, t, form);
    auto csys = constrain_stage_system(sys.op, sys.rhs, dofs, values);

    Vector x0 = csys.initial_guess;
    if (opts_.warm_start && last_stages_.size() == x0.size()) {
      x0 = last_stages_;
      dofs.copy(csys.initial_guess, x0);
    }

    StepReport report;
    const StagePreconditioner* pc = coupled_preconditioner(problem, dofs);
    KrylovResult kr;
    try {
      kr = fgmres(csys.op, pc, csys.rhs, opts_.krylov, std::move(x0));
    } catch (const NonConvergence& e) {
      report.krylov_iters = e.iterations();
      report.linear_solves = 1;
      report.final_residual = e.history().empty() ? 0.0 : e.history().back();
      throw StepFailure(std::string("stage solve failed: ") + e.what(), report);
    }
    report.krylov_iters = kr.iterations;
    report.linear_solves = 1;
    report.final_residual = kr.history.back();
    last_stages_ = kr.x;

    update_from_stages(kr.x, s, m);
    ++steps_;
    return report;
  }

  StepReport step_dirk(const SemidiscreteProblem& problem) {
    if (!is_lower_triangular(tab_))
      throw FormulationError("DIRK stepping requires a lower-triangular Butcher matrix");
    check_state(problem);
    const int s = tab_.stages();
    const auto m = static_cast<Eigen::Index>(problem.m);
    const double t = time();
    const DenseMatrix& A = tab_.A();
    const ConstrainedDofs dofs = constrained_dofs(problem);
    const DenseMatrix values = boundary_values(problem, t, StageFormulation::Dirk);

    StepReport report;
    Vector stages = Vector::Zero(s * m);
    for (int i = 0; i < s; ++i) {
      Vector base = u_;
      for (int j = 0; j < i; ++j)
        if (A(i, j) != 0.0) base += dt_ * A(i, j) * stages.segment(j * m, m);
      const double ti = t + tab_.c()[i] * dt_;
      const DenseMatrix row_values = values.size() ? DenseMatrix(values.row(i)) : DenseMatrix(1, 0);
      Vector ki = problem.is_linear()
                      ? dirk_linear_stage(problem, i, ti, base, dofs, row_values, report)
                      : dirk_newton_stage(problem, i, ti, base, dofs, row_values, report);
      stages.segment(i * m, m) = ki;
    }
    for (int i = 0; i < s; ++i)
      if (tab_.b()[i] != 0.0) u_ += dt_ * tab_.b()[i] * stages.segment(i * m, m);
    last_stages_ = std::move(stages);
    ++steps_;
    return report;
  }

  /// Newton on the stacked stage residual. Jacobian blocks are
  /// delta_ij dF/du'_i + dt a_ij dF/du_i (AI); IA and stage-value forms
  /// keep the dF/du blocks on the diagonal.
  StepReport step_newton(const SemidiscreteProblem& problem) {
    if (opts_.formulation == StageFormulation::Dirk) return step_dirk(problem);
    check_state(problem);
    if (!problem.residual || !problem.mass_jacobian || !problem.stiffness_jacobian)
      throw FormulationError("Newton path needs residual and Jacobian evaluators");
    const int s = tab_.stages();
    const auto m = static_cast<Eigen::Index>(problem.m);
    const double t = time();
    const auto form = opts_.formulation;
    const DenseMatrix& A = tab_.A();
    const DenseMatrix Ainv = form == StageFormulation::StageDerivativeAI ? DenseMatrix() : DenseMatrix(A.inverse());
    DenseMatrix C1, C2;
    if (form == StageFormulation::StageDerivativeAI) {
      C1 = DenseMatrix::Identity(s, s);
      C2 = A;
    } else {
      C1 = Ainv;
      C2 = DenseMatrix::Identity(s, s);
    }

    const ConstrainedDofs dofs = constrained_dofs(problem);
    const DenseMatrix values = boundary_values(problem, t, form);

    Vector X = Vector::Zero(s * m);
    if (form == StageFormulation::StageValue)
      for (int i = 0; i < s; ++i) X.segment(i * m, m) = u_;
    if (!dofs.empty()) dofs.copy(lift_stage_values(dofs, values, static_cast<std::size_t>(s)), X);

    StepReport report;
    Eigen::MatrixXd U(m, s), Udot(m, s);
    auto stage_states = [&](const Vector& x) {
      Eigen::Map<const Eigen::MatrixXd> Xm(x.data(), m, s);
      switch (form) {
        case StageFormulation::StageDerivativeAI:
          U = (dt_ * (Xm * A.transpose())).colwise() + u_;
          Udot = Xm;
          break;
        case StageFormulation::StageDerivativeIA:
          U = (dt_ * Xm).colwise() + u_;
          Udot = Xm * Ainv.transpose();
          break;
        default:
          U = Xm;
          Udot = (Xm.colwise() - u_) * Ainv.transpose() / dt_;
          break;
      }
    };
    const double scale = form == StageFormulation::StageValue ? dt_ : 1.0;
    auto residual = [&](const Vector& x) {
      stage_states(x);
      Vector R(s * m);
      for (int i = 0; i < s; ++i)
        R.segment(i * m, m) = scale * problem.residual(t + tab_.c()[i] * dt_, U.col(i), Udot.col(i));
      dofs.zero(R);
      return R;
    };

    Vector R = residual(X);
    double r0 = R.norm();
    report.newton_history.push_back(r0);
    if (!std::isfinite(r0)) throw StepFailure("non-finite stage residual", report);
    const double target = std::max(opts_.newton.rtol * r0, opts_.newton.atol);
    while (R.norm() > target) {
      if (report.newton_iters >= opts_.newton.maxit)
        throw NonlinearDivergence("Newton did not converge in " + std::to_string(opts_.newton.maxit) +
                                      " iterations",
                                  report.newton_history, report.newton_iters);
      std::vector<MatrixPtr> masses, stiffs;
      for (int i = 0; i < s; ++i) {
        const double ti = t + tab_.c()[i] * dt_;
        const Vector ui = U.col(i), udi = Udot.col(i);
        masses.push_back(std::make_shared<const SparseMatrix>(problem.mass_jacobian(ti, ui, udi)));
        stiffs.push_back(std::make_shared<const SparseMatrix>(problem.stiffness_jacobian(ti, ui, udi)));
      }
      KroneckerStageOperator J(C1, C2, masses, stiffs, dt_);
      ConstrainedOperator<KroneckerStageOperator> Jc(J, dofs);
      std::optional<StagePreconditioner> pc;
      if (opts_.pc_kind) pc.emplace(*opts_.pc_kind, tab_, masses, stiffs, dt_, splitting(), dofs);
      KrylovResult kr;
      try {
        kr = fgmres(Jc, pc ? &*pc : nullptr, Vector(-R), opts_.krylov);
      } catch (const NonConvergence& e) {
        report.krylov_iters += e.iterations();
        throw StepFailure(std::string("Newton linear solve failed: ") + e.what(), report);
      }
      report.krylov_iters += kr.iterations;
      ++report.linear_solves;
      X += kr.x;
      ++report.newton_iters;
      R = residual(X);
      report.newton_history.push_back(R.norm());
      if (!R.allFinite()) throw StepFailure("Newton produced a non-finite residual", report);
    }
    report.final_residual = R.norm();
    last_stages_ = X;
    update_from_stages(X, s, m);
    ++steps_;
    return report;
  }

 private:
  Splitting splitting() const noexcept {
    return opts_.formulation == StageFormulation::StageDerivativeAI ? Splitting::AI : Splitting::IA;
  }

  void check_state(const SemidiscreteProblem& problem) const {
    if (static_cast<std::size_t>(u_.size()) != problem.m)
      throw DimensionMismatch("state length does not match problem size");
  }

  static ConstrainedDofs constrained_dofs(const SemidiscreteProblem& problem) {
    if (!problem.dirichlet) return {};
    return ConstrainedDofs(problem.m, problem.dirichlet->dofs);
  }

  /// Stage values ordered like ConstrainedDofs (sorted, unique).
  DenseMatrix boundary_values(const SemidiscreteProblem& problem, double t, StageFormulation form) const {
    if (!problem.dirichlet) return DenseMatrix(tab_.stages(), 0);
    DirichletBC sorted = *problem.dirichlet;
    sorted.dofs = ConstrainedDofs(problem.m, sorted.dofs).dofs();
    return stage_bc_values(opts_.bc_method, tab_, sorted, u_, t, dt_, form);
  }

  void update_from_stages(const Vector& x, int s, Eigen::Index m) {
    const DenseMatrix& A = tab_.A();
    switch (opts_.formulation) {
      case StageFormulation::StageDerivativeAI:
        for (int i = 0; i < s; ++i)
          if (tab_.b()[i] != 0.0) u_ += dt_ * tab_.b()[i] * x.segment(i * m, m);
        break;
      case StageFormulation::StageDerivativeIA: {
        const Vector k = kron_identity(A.inverse(), x);
        for (int i = 0; i < s; ++i)
          if (tab_.b()[i] != 0.0) u_ += dt_ * tab_.b()[i] * k.segment(i * m, m);
        break;
      }
      case StageFormulation::StageValue: {
        if (is_stiffly_accurate(tab_)) {
          u_ = x.segment((s - 1) * m, m);
        } else {
          const DenseVector weights = A.transpose().partialPivLu().solve(tab_.b());
          const Vector un = u_;
          for (int i = 0; i < s; ++i) u_ += weights[i] * (x.segment(i * m, m) - un);
        }
        break;
      }
      case StageFormulation::Dirk:
        break;
    }
  }

  const StagePreconditioner* coupled_preconditioner(const SemidiscreteProblem& problem,
                                                    const ConstrainedDofs& dofs) {
    if (!opts_.pc_kind) return nullptr;
    if (!coupled_pc_ || cached_mass_ != problem.mass.get() || coupled_pc_->dt() != dt_) {
      coupled_pc_.emplace(*opts_.pc_kind, tab_, problem.mass, problem.stiffness, dt_, splitting(), dofs);
      cached_mass_ = problem.mass.get();
      ++pc_builds_;
    }
    return &*coupled_pc_;
  }

  /// Exact factorization of M + dt a_ii K for stage i, cached until dt changes.
  const BlockFactorization* dirk_block(const SemidiscreteProblem& problem, int i, const ConstrainedDofs& dofs) {
    if (cached_mass_dirk_ != problem.mass.get()) {
      dirk_blocks_.clear();
      cached_mass_dirk_ = problem.mass.get();
    }
    if (dirk_blocks_.size() != static_cast<std::size_t>(tab_.stages()))
      dirk_blocks_.assign(static_cast<std::size_t>(tab_.stages()), std::nullopt);
    auto& block = dirk_blocks_[static_cast<std::size_t>(i)];
    if (!block) {
      SparseMatrix B = linear_combination(1.0, *problem.mass, dt_ * tab_.A()(i, i), *problem.stiffness);
      if (!dofs.empty()) B = eliminate_dofs(B, dofs.mask());
      try {
        block.emplace(B);
      } catch (const FactorizationError& e) {
        throw FactorizationError("DIRK stage " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    return &*block;
  }

  Vector dirk_linear_stage(const SemidiscreteProblem& problem, int i, double ti, const Vector& base,
                           const ConstrainedDofs& dofs, const DenseMatrix& row_values, StepReport& report) {
    const double aii = tab_.A()(i, i);
    DenseMatrix c1 = DenseMatrix::Ones(1, 1), c2 = DenseMatrix::Constant(1, 1, aii);
    KroneckerStageOperator op(c1, c2, problem.mass, problem.stiffness, dt_);
    Vector rhs = problem.load(ti) - spmv(*problem.stiffness, base);
    auto csys = constrain_stage_system(op, rhs, dofs, row_values);

    const BlockFactorization* block = opts_.pc_kind ? dirk_block(problem, i, dofs) : nullptr;
    std::optional<BlockSolvePreconditioner> pc;
    if (block) pc.emplace(*block);
    try {
      auto kr = fgmres(csys.op, pc ? &*pc : nullptr, csys.rhs, opts_.krylov, csys.initial_guess);
      report.krylov_iters += kr.iterations;
      ++report.linear_solves;
      report.final_residual = kr.history.back();
      return kr.x;
    } catch (const NonConvergence& e) {
      report.krylov_iters += e.iterations();
      throw StepFailure("DIRK stage " + std::to_string(i + 1) + " solve failed: " + e.what(), report);
    }
  }

  Vector dirk_newton_stage(const SemidiscreteProblem& problem, int i, double ti, const Vector& base,
                           const ConstrainedDofs& dofs, const DenseMatrix& row_values, StepReport& report) {
    if (!problem.residual || !problem.mass_jacobian || !problem.stiffness_jacobian)
      throw FormulationError("Newton path needs residual and Jacobian evaluators");
    const double aii = tab_.A()(i, i);
    const auto m = static_cast<Eigen::Index>(problem.m);
    Vector k = Vector::Zero(m);
    if (!dofs.empty()) dofs.copy(lift_stage_values(dofs, row_values, 1), k);
    auto residual = [&](const Vector& kk) {
      Vector R = problem.residual(ti, Vector(base + dt_ * aii * kk), kk);
      dofs.zero(R);
      return R;
    };
    Vector R = residual(k);
    const double target = std::max(opts_.newton.rtol * R.norm(), opts_.newton.atol);
    report.newton_history.push_back(R.norm());
    if (!R.allFinite()) throw StepFailure("DIRK stage " + std::to_string(i + 1) + ": non-finite residual", report);
    int iters = 0;
    while (R.norm() > target) {
      if (iters >= opts_.newton.maxit)
        throw NonlinearDivergence("DIRK stage " + std::to_string(i + 1) + ": Newton did not converge",
                                  report.newton_history, iters);
      const Vector ui = base + dt_ * aii * k;
      auto Mi = std::make_shared<const SparseMatrix>(problem.mass_jacobian(ti, ui, k));
      auto Ki = std::make_shared<const SparseMatrix>(problem.stiffness_jacobian(ti, ui, k));
      KroneckerStageOperator J(DenseMatrix::Ones(1, 1), DenseMatrix::Constant(1, 1, aii), Mi, Ki, dt_);
      ConstrainedOperator<KroneckerStageOperator> Jc(J, dofs);
      std::optional<BlockFactorization> f;
      std::optional<BlockSolvePreconditioner> pc;
      if (opts_.pc_kind) {
        SparseMatrix B = linear_combination(1.0, *Mi, dt_ * aii, *Ki);
        if (!dofs.empty()) B = eliminate_dofs(B, dofs.mask());
        f.emplace(B);
        pc.emplace(*f);
      }
      try {
        auto kr = fgmres(Jc, pc ? &*pc : nullptr, Vector(-R), opts_.krylov);
        report.krylov_iters += kr.iterations;
        ++report.linear_solves;
        k += kr.x;
      } catch (const NonConvergence& e) {
        report.krylov_iters += e.iterations();
        throw StepFailure("DIRK stage " + std::to_string(i + 1) + " linear solve failed: " + e.what(), report);
      }
      ++iters;
      ++report.newton_iters;
      R = residual(k);
      report.newton_history.push_back(R.norm());
    }
    report.final_residual = R.norm();
    return k;
  }

  ButcherTableau tab_;
  StepperOptions opts_;
  double dt_;
  double t_base_;
  std::size_t steps_ = 0;
  Vector u_;
  Vector last_stages_;
  std::optional<StagePreconditioner> coupled_pc_;
  const SparseMatrix* cached_mass_ = nullptr;
  std::vector<std::optional<BlockFactorization>> dirk_blocks_;
  const SparseMatrix* cached_mass_dirk_ = nullptr;
  int pc_builds_ = 0;
};

struct AdvanceReport {
  std::size_t steps = 0;
  int newton_iters = 0;
  int krylov_iters = 0;
  int linear_solves = 0;
  std::vector<StepReport> reports;

  /// Mean Krylov iterations per linear solve.
  double mean_krylov_per_solve() const {
    return linear_solves == 0 ? 0.0 : static_cast<double>(krylov_iters) / linear_solves;
  }
};

using StepObserver = std::function<void(const TimeStepper&, const StepReport&)>;

/// Steps to t_final. When (t_final - t) / dt is not an integer (up to a
/// few ulps) the last step is shortened.
inline AdvanceReport advance(TimeStepper& stepper, const SemidiscreteProblem& problem, double t_final,
                             const StepObserver& observer = {}) {
  AdvanceReport agg;
  const double span = t_final - stepper.time();
  const double eps = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_final));
  if (span < -eps) throw Error("advance: t_final is before the current time");
  if (span <= eps) return agg;
  if (!(stepper.dt() > 0.0)) throw Error("advance: dt must be positive");

  const double ratio = span / stepper.dt();
  auto full = static_cast<std::size_t>(std::llround(ratio));
  bool shortened = false;
  const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, ratio);
  if (std::abs(ratio - static_cast<double>(full)) > slack) {
    full = static_cast<std::size_t>(std::floor(ratio));
    shortened = true;
  }

  auto record = [&](const StepReport& r) {
    ++agg.steps;
    agg.newton_iters += r.newton_iters;
    agg.krylov_iters += r.krylov_iters;
    agg.linear_solves += r.linear_solves;
    agg.reports.push_back(r);
    if (observer) observer(stepper, r);
  };
  auto guarded = [&]() {
    try {
      return stepper.step(problem);
    } catch (const Error& e) {
      throw AdvanceError("step " + std::to_string(agg.steps + 1) + " failed: " + e.what(), agg.steps);
    }
  };

  for (std::size_t n = 0; n < full; ++n) record(guarded());
  if (shortened) {
    const double dt = stepper.dt();
    stepper.set_dt(t_final - stepper.time());
    record(guarded());
    stepper.set_dt(dt);
  }
  return agg;
}

}  // namespace rkstage
