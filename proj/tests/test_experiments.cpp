// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rkstage/experiments.hpp"

using namespace rkstage;

TEST(ObservedOrder, ExactPowerLaw) {
  std::vector<double> x{0.2, 0.1, 0.05, 0.025}, e;
  for (double h : x) e.push_back(3.0 * std::pow(h, 2.5));
  EXPECT_NEAR(observed_order(x, e), 2.5, 1e-12);
  EXPECT_THROW(observed_order({0.1}, {1.0}), Error);
  EXPECT_THROW(observed_order({0.1, 0.2}, {1.0}), Error);
}

TEST(ObservedOrder, LeastSquaresNotEndpoints) {
  // Slopes 1 then 3: the fit over three points is 2, pairwise would differ.
  std::vector<double> x{1.0, 0.5, 0.25}, e{1.0, 0.5, 0.0625};
  EXPECT_NEAR(observed_order(x, e), 2.0, 1e-12);
}

TEST(Formatting, NumbersAndOptionals) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1e-12), "1e-12");
  EXPECT_EQ(format_optional(std::nullopt), "");
}

TEST(BcTrajectory, DaeReachesSteadyStateOdeStaysAtZero) {
  const auto tab = lobatto_iiic(3);
  const auto dae = run_bc_trajectory(tab, BcMethod::DAE, 0.05, 0.5);
  const auto ode = run_bc_trajectory(tab, BcMethod::ODE, 0.05, 0.5);
  ASSERT_EQ(dae.size(), 11u);
  ASSERT_EQ(ode.size(), 11u);
  EXPECT_EQ(dae.front().t, 0.0);
  EXPECT_NEAR(dae.back().t, 0.5, 1e-14);
  EXPECT_NEAR(dae.back().nrmu, 1.0, 0.02);
  for (const auto& r : ode) EXPECT_LT(r.nrmu, 1e-10);
}

TEST(BcTrajectory, CsvLayout) {
  std::ostringstream os;
  write_norm_csv(os, {{0.0, 0.0}, {0.05, 0.25}});
  EXPECT_EQ(os.str(), "t,nrmu\n0,0\n0.05,0.25\n");
}

TEST(TemporalConvergence, RadauThreeIsFifthOrder) {
  StepperOptions o;
  o.krylov.rtol = 1e-13;
  const auto rows = run_temporal_convergence(dahlquist(), radau_iia(3), o, {0.2, 0.1, 0.05}, 1.0);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[0].order.has_value());
  ASSERT_TRUE(rows[2].order.has_value());
  EXPECT_NEAR(*rows[2].order, 5.0, 0.2);
  EXPECT_NEAR(*fitted_order(rows), 5.0, 0.2);
}

TEST(TemporalConvergence, ZeroDynamicsHasNoOrder) {
  const auto rows = run_temporal_convergence(zero_dynamics(), radau_iia(2), {}, {0.2, 0.1}, 1.0);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.err.has_value());
    EXPECT_LT(*r.err, 1e-14);
  }
  std::ostringstream os;
  write_temporal_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, 13), "dt,err,order\n");
}

TEST(TemporalConvergence, FailedRunsLeaveEmptyCells) {
  StepperOptions o;
  o.newton.maxit = 1;
  o.newton.atol = 0.0;
  o.newton.rtol = 1e-15;
  const auto rows = run_temporal_convergence(riccati(), radau_iia(2), o, {0.1}, 0.5);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].err.has_value());
  std::ostringstream os;
  write_temporal_csv(os, rows);
  EXPECT_EQ(os.str(), "dt,err,order\n0.1,,\n");
}

TEST(TemporalConvergence, ProblemLookup) {
  EXPECT_EQ(ode_problem_by_name("riccati").name, "riccati");
  EXPECT_EQ(ode_problem_by_name("prothero-robinson").name, "prothero-robinson");
  EXPECT_THROW(ode_problem_by_name("lorenz"), Error);
}

TEST(SpatialConvergence, ErrorsShrinkAndCsv) {
  const auto rows = run_spatial_convergence(radau_iia(2), {}, {4, 8}, 4.0, 0.5);
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_TRUE(rows[0].l2 && rows[1].l2);
  EXPECT_LT(*rows[1].l2, *rows[0].l2);
  EXPECT_LT(*rows[1].h1, *rows[0].h1);
  std::ostringstream os;
  write_spatial_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, 14), "N,L2err,H1err\n");
}

TEST(Bench, SmallRunIsDeterministicInIterations) {
  StepperOptions o;
  o.formulation = StageFormulation::StageDerivativeIA;
  const auto a = run_precond_bench({"radau-iia:1", "radau-iia:2"}, o, 8, 2);
  const auto b = run_precond_bench({"radau-iia:1", "radau-iia:2"}, o, 8, 2);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].ns, 1);
  EXPECT_EQ(a[1].ns, 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_GT(a[i].its, 0.0);
    EXPECT_EQ(a[i].its, b[i].its);
  }
  std::ostringstream os;
  write_bench_csv(os, a);
  EXPECT_EQ(os.str().substr(0, 12), "ns,time,Its\n");
}
