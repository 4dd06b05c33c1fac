// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "rkstage/problems.hpp"
#include "rkstage/stepper.hpp"

using namespace rkstage;

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

StepperOptions options_for(StageFormulation form, double rtol = 1e-12) {
  StepperOptions o;
  o.formulation = form;
  o.krylov.rtol = rtol;
  o.krylov.atol = 1e-300;
  return o;
}

const StageFormulation kCoupled[] = {StageFormulation::StageDerivativeAI, StageFormulation::StageDerivativeIA,
                                     StageFormulation::StageValue};

/// Stability function R(z) = 1 + z b^T (I - z A)^{-1} 1.
double stability(const ButcherTableau& tab, double z) {
  const int s = tab.stages();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(s, s);
  return 1.0 + z * tab.b().dot((I - z * tab.A()).lu().solve(Eigen::VectorXd::Ones(s)));
}

/// One dense AI step of M u' + K u = f(t) without constraints.
Eigen::VectorXd dense_step(const ButcherTableau& tab, const Eigen::MatrixXd& M, const Eigen::MatrixXd& K,
                           const std::function<Vector(double)>& f, const Eigen::VectorXd& u, double t, double dt) {
  const int s = tab.stages();
  const auto m = M.rows();
  const Eigen::MatrixXd D = kron(Eigen::MatrixXd::Identity(s, s), M) + dt * kron(tab.A(), K);
  Eigen::VectorXd rhs(s * m);
  for (int i = 0; i < s; ++i) rhs.segment(i * m, m) = f(t + tab.c()[i] * dt) - K * u;
  const Eigen::VectorXd k = D.lu().solve(rhs);
  Eigen::VectorXd out = u;
  for (int i = 0; i < s; ++i) out += dt * tab.b()[i] * k.segment(i * m, m);
  return out;
}

/// Brute-force Newton on k_i = (u + dt sum_j a_ij k_j)^2 with dense LU.
double dense_riccati_step(const ButcherTableau& tab, double u, double dt) {
  const int s = tab.stages();
  Eigen::VectorXd k = Eigen::VectorXd::Zero(s);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd U = (u + dt * (tab.A() * k).array()).matrix();
    const Eigen::VectorXd R = k - U.cwiseProduct(U);
    if (R.norm() < 1e-15) break;
    const Eigen::MatrixXd J = Eigen::MatrixXd::Identity(s, s) - 2.0 * dt * U.asDiagonal() * tab.A();
    k -= J.lu().solve(R);
  }
  return u + dt * tab.b().dot(k);
}

SemidiscreteProblem heat_no_bc(int N) {
  auto ops = assemble_heat(StructuredGrid(1, N));
  const auto m = static_cast<Eigen::Index>(ops.mass.rows());
  return make_linear_problem(std::move(ops.mass), std::move(ops.stiffness),
                             [m](double t) { return Vector(Vector::LinSpaced(m, 0.0, 1.0) * std::cos(t)); });
}

ButcherTableau implicit_midpoint() {
  return ButcherTableau("midpoint", Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::VectorXd::Ones(1),
                        Eigen::VectorXd::Constant(1, 0.5), 2, 1);
}

Vector run(const ButcherTableau& tab, const StepperOptions& opts, const SemidiscreteProblem& p, const Vector& u0,
           double dt, int steps) {
  TimeStepper st(tab, dt, 0.0, u0, opts);
  for (int n = 0; n < steps; ++n) st.step(p);
  return st.solution();
}

}  // namespace

TEST(StageSystem, SingleStageFormsCoincide) {
  const auto p = heat_no_bc(6);
  const Vector u = Vector::LinSpaced(7, 1.0, 2.0);
  const double dt = 0.2;
  const Eigen::MatrixXd M = p.mass->to_dense(), K = p.stiffness->to_dense();
  for (auto form : {Splitting::AI, Splitting::IA}) {
    const auto sys = assemble_linear_stage_system(p, radau_iia(1), 0.0, dt, u, form);
    const Vector v = Vector::Random(7);
    EXPECT_LT((apply_kronecker(sys.op, v) - (M + dt * K) * v).norm(), 1e-13);
    EXPECT_LT((sys.rhs - (p.load(dt) - K * u)).norm(), 1e-14);
  }
}

TEST(StageSystem, AiSolutionMapsToIaSolution) {
  const auto p = heat_no_bc(8);
  const auto tab = radau_iia(3);
  const Vector u = Vector::Random(9);
  KrylovSettings ks;
  ks.rtol = 1e-13;
  const auto ai = assemble_linear_stage_system(p, tab, 0.1, 0.05, u, Splitting::AI);
  const auto ia = assemble_linear_stage_system(p, tab, 0.1, 0.05, u, Splitting::IA);
  const auto k = fgmres(ai.op, ai.rhs, ks).x;
  const auto w = fgmres(ia.op, ia.rhs, ks).x;
  EXPECT_LT((kron_identity(tab.A(), k) - w).norm(), 1e-9 * w.norm());
}

TEST(StageSystem, StageValueSystemAgainstDense) {
  const auto p = heat_no_bc(4);
  const auto tab = radau_iia(2);
  const double t = 0.3, dt = 0.1;
  const Vector u = Vector::Random(5);
  const auto sys = assemble_stage_value_system(p, tab, t, dt, u);
  const Eigen::MatrixXd M = p.mass->to_dense(), K = p.stiffness->to_dense();
  const Eigen::MatrixXd Ainv = tab.A().inverse();
  const Eigen::MatrixXd D = kron(Ainv, M) + dt * kron(Eigen::MatrixXd::Identity(2, 2), K);
  const Vector Y = D.lu().solve(sys.rhs);
  // Y_i = u + dt sum_j a_ij k_j with k from the AI system.
  const auto ai = assemble_linear_stage_system(p, tab, t, dt, u, Splitting::AI);
  const Vector k = (kron(Eigen::MatrixXd::Identity(2, 2), M) + dt * kron(tab.A(), K)).lu().solve(ai.rhs);
  Vector Yref = kron_identity(dt * tab.A(), k);
  for (int i = 0; i < 2; ++i) Yref.segment(i * 5, 5) += u;
  EXPECT_LT((Y - Yref).norm(), 1e-12 * Yref.norm());
}

TEST(StageSystem, RejectsNonlinearProblem) {
  const auto r = riccati();
  EXPECT_THROW(assemble_linear_stage_system(r.problem, radau_iia(2), 0, 0.1, r.y0, Splitting::AI),
               FormulationError);
  EXPECT_THROW(assemble_stage_value_system(r.problem, radau_iia(2), 0, 0.1, r.y0), FormulationError);
}

TEST(Stepper, ConstructionChecks) {
  const Vector u = Vector::Zero(1);
  EXPECT_THROW(TimeStepper(radau_iia(2), -0.1, 0.0, u), Error);
  EXPECT_THROW(TimeStepper(radau_iia(2), std::nan(""), 0.0, u), Error);
  EXPECT_THROW(TimeStepper(lobatto_iiic(3), 0.1, 0.0, u, options_for(StageFormulation::Dirk)), FormulationError);
  ButcherTableau singular("singular", Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Constant(2, 0.5),
                          Eigen::VectorXd::Zero(2), 1, 1);
  EXPECT_THROW(TimeStepper(singular, 0.1, 0.0, u, options_for(StageFormulation::StageDerivativeIA)),
               FormulationError);
  EXPECT_THROW(TimeStepper(singular, 0.1, 0.0, u, options_for(StageFormulation::StageValue)), FormulationError);
  TimeStepper st(radau_iia(2), 0.1, 0.0, Vector::Zero(3));
  EXPECT_THROW(st.step(dahlquist().problem), DimensionMismatch);
}

TEST(StepLinear, NoDynamicsLeavesStateUnchanged) {
  auto p = make_linear_problem(assemble_heat(StructuredGrid(1, 5)).mass, SparseMatrix(6, 6, std::vector<Triplet>{}),
                               nullptr);
  const Vector u = Vector::LinSpaced(6, -1.0, 3.0);
  for (const auto& tab : {radau_iia(1), radau_iia(3), lobatto_iiic(2), lobatto_iiic(3)})
    for (auto form : kCoupled) {
      const Vector out = run(tab, options_for(form), p, u, 0.1, 3);
      EXPECT_LT((out - u).cwiseAbs().maxCoeff(), 1e-12) << tab.name() << " " << to_string(form);
    }
}

TEST(StepLinear, BackwardEulerHalvesDecay) {
  const auto d = dahlquist(-1.0);
  for (auto form : kCoupled) {
    TimeStepper st(radau_iia(1), 1.0, 0.0, d.y0, options_for(form));
    st.step(d.problem);
    EXPECT_NEAR(st.solution()[0], 0.5, 1e-14);
    EXPECT_DOUBLE_EQ(st.time(), 1.0);
  }
}

TEST(StepLinear, RadauTwoStabilityFunction) {
  const auto d = dahlquist(-1.0);
  for (auto form : kCoupled) {
    const Vector out = run(radau_iia(2), options_for(form), d.problem, d.y0, 1.0, 1);
    EXPECT_NEAR(out[0], 4.0 / 11.0, 1e-13) << to_string(form);
  }
}

TEST(StepLinear, HeatAgainstDenseStages) {
  const auto p = heat_no_bc(4);
  const auto tab = radau_iia(2);
  const Vector u0 = Vector::Random(5);
  const Eigen::MatrixXd M = p.mass->to_dense(), K = p.stiffness->to_dense();
  Eigen::VectorXd ref = u0;
  for (int n = 0; n < 3; ++n) ref = dense_step(tab, M, K, p.load, ref, n * 0.1, 0.1);
  for (auto form : kCoupled) {
    const Vector out = run(tab, options_for(form, 1e-13), p, u0, 0.1, 3);
    EXPECT_LT((out - ref).norm(), 1e-10 * ref.norm()) << to_string(form);
  }
}

TEST(StepLinear, UnpreconditionedAgrees) {
  const auto p = heat_no_bc(8);
  const Vector u0 = Vector::Ones(9);
  auto o = options_for(StageFormulation::StageDerivativeAI);
  const Vector a = run(radau_iia(2), o, p, u0, 0.05, 2);
  o.pc_kind.reset();
  const Vector b = run(radau_iia(2), o, p, u0, 0.05, 2);
  EXPECT_LT((a - b).norm(), 1e-9 * a.norm());
}

TEST(StepLinear, KrylovFailureIsReported) {
  const auto model = mms_heat_problem(StructuredGrid(1, 32), heat_mms_1d());
  auto o = options_for(StageFormulation::StageDerivativeAI);
  o.pc_kind.reset();
  o.krylov.maxit = 2;
  TimeStepper st(radau_iia(3), 0.1, 0.0, model.u0, o);
  try {
    st.step(model.problem);
    FAIL() << "expected StepFailure";
  } catch (const StepFailure& e) {
    EXPECT_EQ(e.report().krylov_iters, 2);
  }
  EXPECT_EQ(st.steps_since_dt_change(), 0u);
}

TEST(StepDirk, ZeroStepIsIdentity) {
  const auto p = heat_no_bc(6);
  const Vector u = Vector::Random(7);
  TimeStepper st(alexander_dirk(), 0.0, 0.0, u, options_for(StageFormulation::Dirk));
  st.step(p);
  EXPECT_LT((st.solution() - u).norm(), 1e-14);
}

TEST(StepDirk, WsodirkMatchesStabilityFunction) {
  const auto d = dahlquist(-1.0);
  const auto tab = wsodirk433();
  const Vector out = run(tab, options_for(StageFormulation::Dirk), d.problem, d.y0, 0.1, 2);
  const double R = stability(tab, -0.1);
  EXPECT_NEAR(out[0], R * R, 1e-12);
}

TEST(StepDirk, ExactBlocksGiveOneIterationPerStage) {
  const auto model = mms_heat_problem(StructuredGrid(1, 16), heat_mms_1d());
  TimeStepper st(alexander_dirk(), 0.05, 0.0, model.u0, options_for(StageFormulation::Dirk));
  const auto r = st.step(model.problem);
  EXPECT_EQ(r.linear_solves, 3);
  EXPECT_EQ(r.krylov_iters, 3);
}

TEST(StepDirk, MatchesCoupledPathOnHeat) {
  const auto model = mms_heat_problem(StructuredGrid(1, 32), heat_mms_1d());
  for (const auto& tab : {alexander_dirk(), wsodirk433()}) {
    TimeStepper dirk(tab, 0.05, 0.0, model.u0, options_for(StageFormulation::Dirk));
    TimeStepper coupled(tab, 0.05, 0.0, model.u0, options_for(StageFormulation::StageDerivativeAI));
    advance(dirk, model.problem, 0.5);
    advance(coupled, model.problem, 0.5);
    EXPECT_LT((dirk.solution() - coupled.solution()).norm(), 1e-11 * coupled.solution().norm()) << tab.name();
  }
}

TEST(StepDirk, NewtonMatchesDenseRiccati) {
  const auto r = riccati();
  for (const auto& tab : {alexander_dirk(), wsodirk433()}) {
    const Vector out = run(tab, options_for(StageFormulation::Dirk), r.problem, r.y0, 0.1, 1);
    EXPECT_NEAR(out[0], dense_riccati_step(tab, 1.0, 0.1), 1e-10) << tab.name();
  }
}

TEST(StepNewton, LinearProblemNeedsOneIteration) {
  auto d = dahlquist(-2.0);
  for (auto form : kCoupled) {
    TimeStepper st(radau_iia(3), 0.1, 0.0, d.y0, options_for(form));
    const auto r = st.step_newton(d.problem);
    EXPECT_EQ(r.newton_iters, 1) << to_string(form);
    EXPECT_NEAR(st.solution()[0], stability(radau_iia(3), -0.2), 1e-13);
  }
}

TEST(StepNewton, RiccatiMatchesDenseNewton) {
  const auto r = riccati();
  for (int s = 1; s <= 3; ++s)
    for (auto form : kCoupled) {
      const Vector out = run(radau_iia(s), options_for(form), r.problem, r.y0, 0.1, 1);
      EXPECT_NEAR(out[0], dense_riccati_step(radau_iia(s), 1.0, 0.1), 1e-10) << s << " " << to_string(form);
    }
}

TEST(StepNewton, QuadraticConvergence) {
  const auto r = riccati();
  auto o = options_for(StageFormulation::StageDerivativeAI, 1e-14);
  o.newton.rtol = 1e-14;
  o.newton.atol = 1e-15;
  TimeStepper st(radau_iia(2), 0.2, 0.0, r.y0, o);
  const auto rep = st.step(r.problem);
  const auto& h = rep.newton_history;
  ASSERT_GE(h.size(), 4u);
  EXPECT_LE(rep.newton_iters, 8);
  // e_{k+1} <= C e_k^2 with C fixed: the ratio must not grow.
  const double c1 = h[2] / (h[1] * h[1]), c2 = h[3] / (h[2] * h[2]);
  EXPECT_LT(c2, 10.0 * c1 + 1.0);
  EXPECT_LT(h[3], h[2] * 1e-2);
}

TEST(StepNewton, MaxitRaisesNonlinearDivergence) {
  const auto r = riccati();
  auto o = options_for(StageFormulation::StageDerivativeAI);
  o.newton.maxit = 1;
  o.newton.atol = 0.0;
  o.newton.rtol = 1e-15;
  TimeStepper st(radau_iia(2), 0.4, 0.0, r.y0, o);
  try {
    st.step(r.problem);
    FAIL() << "expected NonlinearDivergence";
  } catch (const NonlinearDivergence& e) {
    EXPECT_EQ(e.iterations(), 1);
    EXPECT_EQ(e.history().size(), 2u);
  }
  o.formulation = StageFormulation::Dirk;
  TimeStepper dirk(alexander_dirk(), 0.4, 0.0, r.y0, o);
  EXPECT_THROW(dirk.step(r.problem), NonlinearDivergence);
}

TEST(StepNewton, DirichletRowsHonoured) {
  const auto model = mms_heat_problem(StructuredGrid(1, 8), heat_mms_1d());
  for (auto form : kCoupled) {
    TimeStepper a(radau_iia(2), 0.1, 0.0, model.u0, options_for(form));
    TimeStepper b(radau_iia(2), 0.1, 0.0, model.u0, options_for(form));
    a.step_newton(model.problem);
    b.step_linear(model.problem);
    EXPECT_LT((a.solution() - b.solution()).norm(), 1e-10 * b.solution().norm()) << to_string(form);
  }
}

TEST(Advance, NothingToDo) {
  const auto d = dahlquist();
  TimeStepper st(radau_iia(2), 0.1, 0.5, d.y0);
  const auto r = advance(st, d.problem, 0.5);
  EXPECT_EQ(r.steps, 0u);
  EXPECT_EQ(st.solution(), d.y0);
  EXPECT_THROW(advance(st, d.problem, 0.4), Error);
}

TEST(Advance, HeatTenSteps) {
  const auto model = mms_heat_problem(StructuredGrid(1, 8), heat_mms_1d());
  TimeStepper st(radau_iia(2), 0.05, 0.0, model.u0);
  int calls = 0;
  const auto r = advance(st, model.problem, 0.5, [&](const TimeStepper&, const StepReport&) { ++calls; });
  EXPECT_EQ(r.steps, 10u);
  EXPECT_EQ(calls, 10);
  EXPECT_EQ(r.linear_solves, 10);
  EXPECT_NEAR(st.time(), 0.5, 1e-15);
}

TEST(Advance, RadauThreeAccuracy) {
  const auto d = dahlquist(-1.0);
  TimeStepper st(radau_iia(3), 0.1, 0.0, d.y0, options_for(StageFormulation::StageDerivativeAI));
  advance(st, d.problem, 1.0);
  EXPECT_LT(std::abs(st.solution()[0] - std::exp(-1.0)), 1e-9);
}

TEST(Advance, ShortensLastStep) {
  const auto d = dahlquist(-1.0);
  const auto tab = radau_iia(2);
  TimeStepper st(tab, 0.3, 0.0, d.y0, options_for(StageFormulation::StageDerivativeAI));
  const auto r = advance(st, d.problem, 1.0);
  EXPECT_EQ(r.steps, 4u);
  EXPECT_DOUBLE_EQ(st.dt(), 0.3);
  EXPECT_NEAR(st.time(), 1.0, 1e-15);
  const double R1 = stability(tab, -0.3);
  const double expect = R1 * R1 * R1 * stability(tab, -(1.0 - 0.9));
  EXPECT_NEAR(st.solution()[0], expect, 1e-12);
}

TEST(Advance, FailureReportsCompletedSteps) {
  auto p = riccati().problem;
  auto inner = p.residual;
  p.residual = [inner](double t, const Vector& u, const Vector& ud) {
    return t > 0.5 ? Vector(Vector::Constant(1, std::nan(""))) : inner(t, u, ud);
  };
  TimeStepper st(radau_iia(2), 0.2, 0.0, Vector::Constant(1, 1.0), options_for(StageFormulation::StageDerivativeAI));
  try {
    advance(st, p, 1.0);
    FAIL() << "expected AdvanceError";
  } catch (const AdvanceError& e) {
    EXPECT_EQ(e.completed_steps(), 2u);
    EXPECT_EQ(st.steps_since_dt_change(), 2u);
  }
}

TEST(Clock, SetDtRebases) {
  const auto d = dahlquist();
  TimeStepper st(radau_iia(1), 0.1, 0.0, d.y0);
  for (int n = 0; n < 3; ++n) st.step(d.problem);
  st.set_dt(0.05);
  EXPECT_NEAR(st.time(), 0.3, 1e-15);
  EXPECT_EQ(st.steps_since_dt_change(), 0u);
  st.step(d.problem);
  EXPECT_NEAR(st.time(), 0.35, 1e-15);
  EXPECT_THROW(st.set_dt(-1.0), Error);
}

TEST(Clock, NoDriftOverManySteps) {
  const auto d = zero_dynamics();
  TimeStepper st(radau_iia(1), 0.1, 0.0, d.y0);
  for (int n = 0; n < 1000; ++n) st.step(d.problem);
  EXPECT_EQ(st.time(), 1000 * 0.1);
}

TEST(Properties, FormulationsAgreeOnHeat) {
  const auto model = mms_heat_problem(StructuredGrid(1, 32), heat_mms_1d());
  const auto tab = radau_iia(3);
  std::vector<Vector> out;
  for (auto form : kCoupled) {
    TimeStepper st(tab, 0.05, 0.0, model.u0, options_for(form));
    advance(st, model.problem, 0.5);
    out.push_back(st.solution());
  }
  for (std::size_t a = 0; a < out.size(); ++a)
    for (std::size_t b = a + 1; b < out.size(); ++b)
      EXPECT_LT((out[a] - out[b]).norm(), 1e-10 * out[0].norm()) << a << " vs " << b;
}

TEST(Properties, StifflyAccurateShortcutIsLastStage) {
  const auto model = mms_heat_problem(StructuredGrid(1, 16), heat_mms_1d());
  for (int s = 1; s <= 3; ++s) {
    TimeStepper st(radau_iia(s), 0.1, 0.0, model.u0, options_for(StageFormulation::StageValue));
    st.step(model.problem);
    const auto m = static_cast<Eigen::Index>(model.u0.size());
    const Vector last = st.last_stages().tail(m);
    EXPECT_TRUE((st.solution().array() == last.array()).all());
  }
}

TEST(Properties, StageValueRecombinationForMidpoint) {
  const auto tab = implicit_midpoint();
  ASSERT_FALSE(is_stiffly_accurate(tab));
  const auto d = dahlquist(-1.0);
  for (auto form : kCoupled) {
    const Vector out = run(tab, options_for(form), d.problem, d.y0, 0.5, 1);
    EXPECT_NEAR(out[0], (1.0 - 0.25) / (1.0 + 0.25), 1e-13) << to_string(form);
  }
  const auto p = heat_no_bc(6);
  const Vector u0 = Vector::Random(7);
  const Vector a = run(tab, options_for(StageFormulation::StageValue), p, u0, 0.1, 2);
  const Vector b = run(tab, options_for(StageFormulation::StageDerivativeAI), p, u0, 0.1, 2);
  EXPECT_LT((a - b).norm(), 1e-10 * b.norm());
}

TEST(Properties, MassNormDecaysWithoutForcing) {
  auto ops = assemble_heat(StructuredGrid(2, 8));
  const SparseMatrix M = ops.mass;
  auto p = make_linear_problem(std::move(ops.mass), std::move(ops.stiffness), nullptr);
  Vector u = Vector::Random(81);
  for (const auto& tab : {radau_iia(2), radau_iia(3), alexander_dirk()}) {
    TimeStepper st(tab, 0.02, 0.0, u, options_for(StageFormulation::StageDerivativeAI));
    double prev = u.dot(spmv(M, u));
    for (int n = 0; n < 10; ++n) {
      st.step(p);
      const double e = st.solution().dot(spmv(M, st.solution()));
      EXPECT_LE(e, prev * (1 + 1e-12)) << tab.name() << " step " << n;
      prev = e;
    }
  }
}

TEST(Properties, PreconditionerBuiltOncePerDt) {
  const auto model = mms_heat_problem(StructuredGrid(1, 16), heat_mms_1d());
  TimeStepper st(radau_iia(2), 0.05, 0.0, model.u0);
  st.prepare(model.problem);
  EXPECT_EQ(st.preconditioner_builds(), 1);
  for (int n = 0; n < 4; ++n) st.step(model.problem);
  EXPECT_EQ(st.preconditioner_builds(), 1);
  st.set_dt(0.025);
  st.step(model.problem);
  EXPECT_EQ(st.preconditioner_builds(), 2);
}

TEST(Properties, WarmStartSameAnswer) {
  const auto model = mms_heat_problem(StructuredGrid(1, 16), heat_mms_1d());
  auto cold = options_for(StageFormulation::StageDerivativeAI, 1e-12);
  auto warm = cold;
  warm.warm_start = true;
  const Vector a = run(radau_iia(3), cold, model.problem, model.u0, 0.02, 5);
  const Vector b = run(radau_iia(3), warm, model.problem, model.u0, 0.02, 5);
  EXPECT_LT((a - b).norm(), 1e-10 * a.norm());
}

TEST(Properties, BoundaryExactAfterEveryStep) {
  const auto mms = heat_mms_2d();
  StructuredGrid grid(2, 8);
  const auto model = mms_heat_problem(grid, mms);
  for (int s = 2; s <= 3; ++s)
    for (auto form : kCoupled) {
      TimeStepper st(radau_iia(s), 0.1, 0.0, model.u0, options_for(form, 1e-10));
      advance(st, model.problem, 0.5, [&](const TimeStepper& cur, const StepReport&) {
        double dev = 0.0;
        for (auto d : model.problem.dirichlet->dofs)
          dev = std::max(dev, std::abs(cur.solution()[static_cast<Eigen::Index>(d)] -
                                       model.problem.dirichlet->g(cur.time(), d)));
        EXPECT_LE(dev, 1e-9) << s << " " << to_string(form);
      });
    }
}
