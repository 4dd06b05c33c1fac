// SPDX-License-Identifier: Apache-2.0
// rkstage: runs the heat-equation experiments and writes CSV data files.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rkstage/experiments.hpp"

namespace {

using namespace rkstage;

constexpr int kConfigError = 2;
constexpr int kSolverFailure = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string tableau;
  std::string stage_type = "deriv";
  std::string splitting = "ai";
  std::string bc_method = "dae";
  std::string pc = "rana-ld";
  double dt = 0.0;
  int nx = 0;
  double tfinal = 0.0;
  double rtol = 1e-8;
  int maxit = 500;
  int restart = 50;
  std::string out;

  std::string mode = "spatial";
  std::string problem = "dahlquist";
  double cfl = 4.0;
  int levels = 4;
  int steps = 16;
  std::vector<std::string> tableaux;
};

StepperOptions stepper_options(const Config& cfg) {
  StepperOptions o;
  try {
    o.formulation = formulation_from_flags(cfg.stage_type, cfg.splitting);
    o.bc_method = bc_method_from_string(cfg.bc_method);
    o.pc_kind = preconditioner_from_flag(cfg.pc);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.rtol > 0.0)) throw ConfigError("--rtol must be positive");
  o.krylov.rtol = cfg.rtol;
  o.krylov.maxit = cfg.maxit;
  o.krylov.restart = cfg.restart;
  return o;
}

ButcherTableau parse_tableau(const std::string& spec) {
  try {
    return tableau_from_spec(spec);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void check_formulation(const ButcherTableau& tab, const StepperOptions& o) {
  const auto f = o.formulation;
  if ((f == StageFormulation::StageDerivativeIA || f == StageFormulation::StageValue) && !is_invertible(tab))
    throw ConfigError(to_string(f) + " needs an invertible Butcher matrix; " + tab.name() + " has none");
  if (f == StageFormulation::Dirk && !is_lower_triangular(tab))
    throw ConfigError(tab.name() + " is not diagonally implicit");
}

/// Writes to --out when given, stdout otherwise.
template <class Writer>
void emit(const std::string& path, Writer&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write(os);
}

int cmd_tableau(const Config& cfg) {
  const auto tab = parse_tableau(cfg.tableau.empty() ? "radau-iia:2" : cfg.tableau);
  std::cout << format_tableau(tab);
  if (tab.name() == "Alexander") std::printf("x = %.15f\n", alexander_parameter());
  std::cout << "stiffly accurate: " << (is_stiffly_accurate(tab) ? "yes" : "no") << '\n'
            << "lower triangular: " << (is_lower_triangular(tab) ? "yes" : "no") << '\n'
            << "invertible A:     " << (is_invertible(tab) ? "yes" : "no") << '\n'
            << "order " << tab.formal_order() << ", stage order " << tab.stage_order() << '\n';
  const auto r = order_condition_residuals(tab, tab.formal_order(), tab.stage_order());
  std::printf("B(%d) max residual %.3e\n", tab.formal_order(), r.max_quadrature());
  std::printf("C(%d) max residual %.3e\n", tab.stage_order(), r.max_stage());
  try {
    const auto f = ldu_factor(tab);
    std::cout << "LDU pivots:";
    for (Eigen::Index i = 0; i < f.D.size(); ++i) std::printf(" %.6g", f.D[i]);
    std::cout << '\n';
  } catch (const SingularFactorization&) {
    std::cout << "LDU pivots: none (zero pivot)\n";
  }
  if (!cfg.out.empty()) emit(cfg.out, [&](std::ostream& os) { os << tableau_to_csv(tab); });
  return 0;
}

int cmd_bc_compare(const Config& cfg) {
  const auto tab = parse_tableau(cfg.tableau.empty() ? "lobatto-iiic:3" : cfg.tableau);
  auto opts = stepper_options(cfg);
  check_formulation(tab, opts);
  const double dt = cfg.dt > 0 ? cfg.dt : 0.05;
  const double tfinal = cfg.tfinal > 0 ? cfg.tfinal : 0.5;
  const std::filesystem::path dir = cfg.out.empty() ? "." : cfg.out;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");

  for (auto [method, file] : {std::pair{BcMethod::DAE, "daenorm.csv"}, std::pair{BcMethod::ODE, "odenorm.csv"}}) {
    const auto rows = run_bc_trajectory(tab, method, dt, tfinal, opts);
    const auto path = (dir / file).string();
    emit(path, [&](std::ostream& os) { write_norm_csv(os, rows); });
    std::printf("%s: %zu rows, final nrmu %.6g\n", path.c_str(), rows.size(), rows.back().nrmu);
  }
  return 0;
}

int cmd_converge(const Config& cfg) {
  auto opts = stepper_options(cfg);
  if (cfg.levels < 2) throw ConfigError("--levels must be at least 2");
  if (cfg.mode == "spatial") {
    const auto tab = parse_tableau(cfg.tableau.empty() ? "radau-iia:2" : cfg.tableau);
    check_formulation(tab, opts);
    const int finest = cfg.nx > 0 ? cfg.nx : 64;
    std::vector<int> Ns;
    for (int l = cfg.levels - 1; l >= 0; --l) {
      const int N = finest >> l;
      if (N < 2 || (N << l) != finest) throw ConfigError("--nx must be divisible by 2^(levels-1) with N >= 2");
      Ns.push_back(N);
    }
    const auto rows = run_spatial_convergence(tab, opts, Ns, cfg.cfl, cfg.tfinal > 0 ? cfg.tfinal : 1.0);
    emit(cfg.out, [&](std::ostream& os) { write_spatial_csv(os, rows); });
    std::vector<double> h, l2, h1;
    for (const auto& r : rows)
      if (r.l2 && r.h1) {
        h.push_back(1.0 / r.N);
        l2.push_back(*r.l2);
        h1.push_back(*r.h1);
      }
    if (h.size() >= 2)
      std::fprintf(stderr, "observed order: L2 %.3f, H1 %.3f\n", observed_order(h, l2), observed_order(h, h1));
    return 0;
  }
  if (cfg.mode == "temporal") {
    const auto tab = parse_tableau(cfg.tableau.empty() ? "radau-iia:3" : cfg.tableau);
    check_formulation(tab, opts);
    OdeTestProblem ode;
    try {
      ode = ode_problem_by_name(cfg.problem);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    std::vector<double> dts;
    for (int l = 0; l < cfg.levels; ++l) dts.push_back((cfg.dt > 0 ? cfg.dt : 0.2) / (1 << l));
    const auto rows = run_temporal_convergence(ode, tab, opts, dts, cfg.tfinal > 0 ? cfg.tfinal : 1.0);
    emit(cfg.out, [&](std::ostream& os) { write_temporal_csv(os, rows); });
    if (const auto p = fitted_order(rows)) std::fprintf(stderr, "observed order: %.3f\n", *p);
    return 0;
  }
  throw ConfigError("unknown --mode '" + cfg.mode + "' (spatial, temporal)");
}

int cmd_precond_bench(const Config& cfg) {
  auto opts = stepper_options(cfg);
  std::vector<std::string> specs = cfg.tableaux;
  if (specs.empty()) {
    if (opts.formulation == StageFormulation::Dirk)
      specs = {"radau-iia:1", "alexander", "wsodirk433"};
    else
      specs = {"radau-iia:1", "radau-iia:2", "radau-iia:3", "radau-iia:4"};
  }
  for (const auto& s : specs) check_formulation(parse_tableau(s), opts);
  const int N = cfg.nx > 0 ? cfg.nx : 64;
  if (N < 2) throw ConfigError("--nx must be at least 2");
  if (cfg.steps < 1) throw ConfigError("--steps must be positive");
  const auto rows = run_precond_bench(specs, opts, N, cfg.steps);
  emit(cfg.out, [&](std::ostream& os) { write_bench_csv(os, rows); });
  std::fprintf(stderr, "%-22s %3s %10s %10s %8s\n", "tableau", "ns", "setup[s]", "time[s]", "Its");
  for (const auto& r : rows)
    std::fprintf(stderr, "%-22s %3d %10.4f %10.4f %8.3f\n", r.tableau.c_str(), r.ns, r.setup, r.time, r.its);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fully implicit Runge-Kutta experiments for the heat equation"};
  app.require_subcommand(1);
  Config cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--tableau", cfg.tableau, "FAMILY[:S], e.g. radau-iia:3, lobatto-iiic:2, alexander, wsodirk433");
    sub->add_option("--stage-type", cfg.stage_type, "deriv, value or dirk")->capture_default_str();
    sub->add_option("--splitting", cfg.splitting, "ai or ia")->capture_default_str();
    sub->add_option("--bc-method", cfg.bc_method, "dae or ode")->capture_default_str();
    sub->add_option("--pc", cfg.pc, "jacobi, gs-lower, gs-upper, rana-ld, rana-du or none")->capture_default_str();
    sub->add_option("--dt", cfg.dt, "time step");
    sub->add_option("--nx", cfg.nx, "cells per direction");
    sub->add_option("--tfinal", cfg.tfinal, "final time");
    sub->add_option("--rtol", cfg.rtol, "FGMRES relative tolerance")->capture_default_str();
    sub->add_option("--maxit", cfg.maxit, "FGMRES iteration limit")->capture_default_str();
    sub->add_option("--restart", cfg.restart, "FGMRES restart length")->capture_default_str();
  };

  auto* tableau = app.add_subcommand("tableau", "print a Butcher tableau and its order-condition report");
  common(tableau);
  tableau->add_option("--out", cfg.out, "also write the tableau as CSV");

  auto* bc = app.add_subcommand("bc-compare", "DAE vs ODE boundary enforcement on incompatible 1D heat data");
  common(bc);
  bc->add_option("--out", cfg.out, "output directory for daenorm.csv and odenorm.csv");

  auto* conv = app.add_subcommand("converge", "spatial or temporal convergence sweep");
  common(conv);
  conv->add_option("--mode", cfg.mode, "spatial or temporal")->capture_default_str();
  conv->add_option("--problem", cfg.problem, "temporal problem: dahlquist, prothero-robinson, riccati, zero")
      ->capture_default_str();
  conv->add_option("--cfl", cfg.cfl, "spatial mode uses dt = cfl / N")->capture_default_str();
  conv->add_option("--levels", cfg.levels, "number of refinements")->capture_default_str();
  conv->add_option("--out", cfg.out, "CSV path (stdout if omitted)");

  auto* bench = app.add_subcommand("precond-bench", "mean FGMRES iterations against stage count on 2D heat");
  common(bench);
  bench->add_option("--steps", cfg.steps, "time steps per tableau")->capture_default_str();
  bench->add_option("--tableaux", cfg.tableaux, "tableau specs to run (default radau-iia:1..4)");
  bench->add_option("--out", cfg.out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (tableau->parsed()) return cmd_tableau(cfg);
    if (bc->parsed()) return cmd_bc_compare(cfg);
    if (conv->parsed()) return cmd_converge(cfg);
    return cmd_precond_bench(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const UnsupportedStageCount& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
}
