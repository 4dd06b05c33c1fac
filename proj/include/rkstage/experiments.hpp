// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "rkstage/errors.hpp"
#include "rkstage/problems.hpp"
#include "rkstage/stepper.hpp"
#include "rkstage/tableaux.hpp"

namespace rkstage {

/// Least-squares slope of log(err) against log(x).
inline double observed_order(const std::vector<double>& x, const std::vector<double>& err) {
  if (x.size() != err.size() || x.size() < 2) throw Error("observed_order: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(err[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

// ---------------------------------------------------------------------------
// Boundary condition comparison

struct NormSample {
  double t;
  double nrmu;
};

inline std::vector<NormSample> run_bc_trajectory(const ButcherTableau& tab, BcMethod method, double dt,
                                                 double t_final, StepperOptions options = {}) {
  auto model = incompatible_heat_1d(10);
  options.bc_method = method;
  TimeStepper stepper(tab, dt, 0.0, model.u0, options);
  std::vector<NormSample> rows{{0.0, l2_norm(model.grid, model.u0)}};
  advance(stepper, model.problem, t_final, [&](const TimeStepper& s, const StepReport&) {
    rows.push_back({s.time(), l2_norm(model.grid, s.solution())});
  });
  return rows;
}

inline void write_norm_csv(std::ostream& os, const std::vector<NormSample>& rows) {
  os << "t,nrmu\n";
  for (const auto& r : rows) os << format_number(r.t) << ',' << format_number(r.nrmu) << '\n';
}

// ---------------------------------------------------------------------------
// Spatial convergence

struct SpatialRow {
  int N;
  std::optional<double> l2;
  std::optional<double> h1;
};

/// 2D manufactured heat problem to t_final with dt = cfl / N.
inline std::vector<SpatialRow> run_spatial_convergence(const ButcherTableau& tab, const StepperOptions& options,
                                                       const std::vector<int>& Ns, double cfl = 4.0,
                                                       double t_final = 1.0) {
  const auto mms = heat_mms_2d();
  std::vector<SpatialRow> rows;
  for (int N : Ns) {
    SpatialRow row{N, std::nullopt, std::nullopt};
    try {
      StructuredGrid grid(2, N);
      auto model = mms_heat_problem(grid, mms);
      TimeStepper stepper(tab, cfl / N, 0.0, model.u0, options);
      advance(stepper, model.problem, t_final);
      row.l2 = l2_error(grid, stepper.solution(), mms.u, t_final);
      row.h1 = h1_error(grid, stepper.solution(), mms, t_final);
    } catch (const Error&) {
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_spatial_csv(std::ostream& os, const std::vector<SpatialRow>& rows) {
  os << "N,L2err,H1err\n";
  for (const auto& r : rows) os << r.N << ',' << format_optional(r.l2) << ',' << format_optional(r.h1) << '\n';
}

// ---------------------------------------------------------------------------
// Temporal convergence

struct TemporalRow {
  double dt;
  std::optional<double> err;
  /// log2 error ratio against the previous row, scaled by the dt ratio.
  std::optional<double> order;
};

inline OdeTestProblem ode_problem_by_name(const std::string& name) {
  if (name == "dahlquist") return dahlquist(-1.0);
  if (name == "prothero-robinson") return prothero_robinson(-1e4);
  if (name == "riccati") return riccati();
  if (name == "zero") return zero_dynamics();
  throw Error("unknown problem '" + name + "' (dahlquist, prothero-robinson, riccati, zero)");
}

inline std::vector<TemporalRow> run_temporal_convergence(const OdeTestProblem& ode, const ButcherTableau& tab,
                                                         const StepperOptions& options,
                                                         const std::vector<double>& dts, double t_final) {
  std::vector<TemporalRow> rows;
  for (double dt : dts) {
    TemporalRow row{dt, std::nullopt, std::nullopt};
    try {
      TimeStepper stepper(tab, dt, ode.t0, ode.y0, options);
      advance(stepper, ode.problem, t_final);
      row.err = std::abs(stepper.solution()[0] - ode.exact(t_final));
    } catch (const Error&) {
    }
    rows.push_back(row);
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& a = rows[i - 1];
    const auto& b = rows[i];
    if (a.err && b.err && *a.err > 0.0 && *b.err > 0.0)
      rows[i].order = std::log2(*a.err / *b.err) / std::log2(a.dt / b.dt);
  }
  return rows;
}

/// Fitted order over rows with positive errors; empty if fewer than two.
inline std::optional<double> fitted_order(const std::vector<TemporalRow>& rows) {
  std::vector<double> x, e;
  for (const auto& r : rows)
    if (r.err && *r.err > 0.0) {
      x.push_back(r.dt);
      e.push_back(*r.err);
    }
  if (x.size() < 2) return std::nullopt;
  return observed_order(x, e);
}

inline void write_temporal_csv(std::ostream& os, const std::vector<TemporalRow>& rows) {
  os << "dt,err,order\n";
  for (const auto& r : rows)
    os << format_number(r.dt) << ',' << format_optional(r.err) << ',' << format_optional(r.order) << '\n';
}

// ---------------------------------------------------------------------------
// Preconditioner benchmark

struct BenchRow {
  int ns;
  std::string tableau;
  /// Wall-clock seconds of the stepping loop.
  double time;
  /// Assembly plus factorization setup, seconds.
  double setup;
  /// Mean Krylov iterations per linear solve; -1 on failure.
  double its;
};

/// 2D manufactured heat problem, dt = h, `steps` steps per tableau.
inline std::vector<BenchRow> run_precond_bench(const std::vector<std::string>& tableaux,
                                               const StepperOptions& options, int N = 64, int steps = 16) {
  using clock = std::chrono::steady_clock;
  const auto mms = heat_mms_2d();
  std::vector<BenchRow> rows;
  for (const auto& spec : tableaux) {
    const auto tab = tableau_from_spec(spec);
    BenchRow row{tab.stages(), tab.name(), 0.0, 0.0, -1.0};
    try {
      const auto t0 = clock::now();
      StructuredGrid grid(2, N);
      auto model = mms_heat_problem(grid, mms);
      TimeStepper stepper(tab, grid.h(), 0.0, model.u0, options);
      stepper.prepare(model.problem);
      const auto t1 = clock::now();
      const auto report = advance(stepper, model.problem, steps * grid.h());
      const auto t2 = clock::now();
      row.setup = std::chrono::duration<double>(t1 - t0).count();
      row.time = std::chrono::duration<double>(t2 - t1).count();
      row.its = report.mean_krylov_per_solve();
    } catch (const Error&) {
      row.its = -1.0;
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "ns,time,Its\n";
  for (const auto& r : rows) os << r.ns << ',' << format_number(r.time) << ',' << format_number(r.its) << '\n';
}

}  // namespace rkstage
