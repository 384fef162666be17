#pragma once

// Batch driver behind `lagflow run`.
//
// Exit codes: 0 converged with no estimate violation, 2 not converged by
// t_max, 3 estimate violation or flow failure, 4 admissibility failure (no
// flow run), 1 config or I/O error.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lagflow/config.hpp"
#include "lagflow/diagnostics.hpp"
#include "lagflow/domains.hpp"
#include "lagflow/error.hpp"
#include "lagflow/flow.hpp"
#include "lagflow/grid.hpp"
#include "lagflow/operators.hpp"
#include "lagflow/state_io.hpp"

namespace lagflow {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitNotConverged = 2,
  kExitViolation = 3,
  kExitInadmissible = 4,
};

inline constexpr const char* kLedgerFile = "ledger.csv";
inline constexpr const char* kFinalStateFile = "final_state.txt";
inline constexpr const char* kSummaryFile = "summary.txt";

/// Everything a run needs, built from a config.
struct Experiment {
  ExperimentConfig config;
  ConvexDomain omega;
  ConvexDomain omega_tilde;
  FlowGrid grid;
  Tau op;
  ForcingFunction forcing;
  FlowState initial;

  FlowProblem problem(int threads) const {
    return FlowProblem{omega,
                       omega_tilde,
                       grid,
                       op,
                       forcing,
                       StepOptions{config.cfl, config.tol_bc, config.max_sweeps, threads},
                       config.tol_c,
                       config.t_max,
                       config.record_every};
  }
};

inline FlowState build_initial(const ExperimentConfig& c, const ConvexDomain& omega, const ConvexDomain& omega_tilde,
                               const FlowGrid& grid) {
  FlowState s;
  if (c.initial == InitialKind::File) {
    s = load_state(c.initial_path.string(), grid);
    s.t = 0.0;
    for (int id = 0; id < grid.size(); ++id) {
      if (grid.classify(id) != NodeClass::Exterior) s.u[static_cast<std::size_t>(id)] += c.offset;
    }
    return s;
  }
  const QuadraticField q = quadratic_initial(omega, omega_tilde);
  const Vec2 o = omega.center();
  const double amp = c.bump_amplitude;
  const double w = c.bump_width;
  const double off = c.offset;
  return sample_field(grid, [&](Vec2 x) {
    const Vec2 d = x - o;
    return q(x) + off + amp * std::exp(-dot(d, d) / w);
  });
}

inline Experiment build_experiment(const ExperimentConfig& c) {
  const ConvexDomain omega = c.omega.build();
  const ConvexDomain omega_tilde = c.omega_tilde.build();
  FlowGrid grid = build_grid(omega, c.spacing);
  FlowState initial = build_initial(c, omega, omega_tilde, grid);
  const ForcingFunction f =
      (c.kappa.x == 0.0 && c.kappa.y == 0.0) ? ForcingFunction::zero() : ForcingFunction::linear(c.kappa);
  return Experiment{c, omega, omega_tilde, std::move(grid), Tau(c.tau), f, std::move(initial)};
}

/// In-memory outcome of an experiment.
struct ExperimentResult {
  int exit_code = kExitOk;
  std::string status;   // converged, not_converged, estimate_violation, inadmissible, or an error kind
  std::string message;  // empty unless the run stopped on an error
  AdmissibilityReport admissibility;
  std::optional<EstimateMonitor::Bounds> bounds;
  std::vector<EstimateRecord> ledger;
  std::size_t violation_count = 0;
  std::map<std::string, std::size_t> violation_counts;
  std::vector<Violation> violations;
  FlowState final_state;
  double c_infinity = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::size_t steps = 0;
};

/// Runs the admissibility gate, then the monitored flow.
inline ExperimentResult execute(const Experiment& ex, int threads = 1) {
  ExperimentResult res;
  res.final_state = ex.initial;
  res.admissibility = check_admissibility(ex.forcing, ex.initial, ex.op, ex.omega, ex.omega_tilde, ex.grid);
  if (!res.admissibility.admissible()) {
    res.exit_code = kExitInadmissible;
    res.status = "inadmissible";
    return res;
  }
  try {
    res.bounds = EstimateMonitor::bounds_for(ex.initial, ex.forcing, ex.op, ex.grid, ex.omega, ex.config.c2_bound);
  } catch (const Error& e) {
    res.exit_code = kExitInadmissible;
    res.status = "inadmissible";
    res.message = e.what();
    return res;
  }

  EstimateMonitor monitor(*res.bounds);
  const int every = ex.config.record_every;
  bool last_recorded = false;
  EstimateRecord last;
  auto observer = [&](const FlowState& s, const StepReport& r, std::size_t idx) {
    last = monitor.observe(s, r, ex.grid, ex.omega_tilde, false);
    last_recorded = idx % static_cast<std::size_t>(every) == 0;
    if (last_recorded) res.ledger.push_back(last);
    res.final_state = s;
    res.steps = idx;
  };
  try {
    const RunResult run_result = run(ex.problem(threads), ex.initial, observer);
    res.final_state = run_result.final_state;
    res.c_infinity = run_result.c_infinity;
    res.converged = run_result.converged;
    res.steps = run_result.steps;
  } catch (const Error& e) {
    res.status = std::string(to_string(e.kind()));
    res.message = e.what();
    res.exit_code = kExitViolation;
  }
  if (!last_recorded && !res.ledger.empty()) res.ledger.push_back(last);
  if (std::isnan(res.c_infinity) && !res.ledger.empty()) res.c_infinity = res.ledger.back().c_estimate;
  res.violation_count = monitor.violation_count();
  res.violation_counts = monitor.violation_counts();
  res.violations = monitor.violations();
  if (!res.message.empty()) return res;
  if (res.violation_count > 0) {
    res.exit_code = kExitViolation;
    res.status = "estimate_violation";
  } else if (!res.converged) {
    res.exit_code = kExitNotConverged;
    res.status = "not_converged";
  } else {
    res.exit_code = kExitOk;
    res.status = "converged";
  }
  return res;
}

inline void write_ledger(std::ostream& os, const std::vector<EstimateRecord>& rows) {
  EstimateMonitor::write_csv_header(os);
  for (const auto& r : rows) EstimateMonitor::write_csv_row(os, r);
}

inline void write_summary(std::ostream& os, const Experiment& ex, const ExperimentResult& res) {
  auto flag = [](bool b) { return b ? "true" : "false"; };
  const auto& a = res.admissibility;
  os << "[summary]\n"
     << "c_infinity = " << format_double(res.c_infinity) << '\n'
     << "converged = " << flag(res.converged) << '\n'
     << "status = " << res.status << '\n'
     << "exit_code = " << res.exit_code << '\n'
     << "steps = " << res.steps << '\n'
     << "t_final = " << format_double(res.final_state.t) << '\n'
     << "violations = " << res.violation_count << '\n';
  if (!res.ledger.empty()) os << "osc_udot_final = " << format_double(res.ledger.back().osc_udot) << '\n';
  if (!res.message.empty()) os << "message = " << res.message << '\n';
  os << "\n[admissibility]\n"
     << "admissible = " << flag(a.admissible()) << '\n'
     << "u0_convex = " << flag(a.u0_convex) << '\n'
     << "delta_max = " << format_double(a.delta_max) << '\n'
     << "osc_f = " << format_double(a.osc_f) << '\n'
     << "df_max = " << format_double(a.df_max) << '\n'
     << "df_threshold = " << format_double(a.df_threshold) << '\n'
     << "lambda1 = " << format_double(a.lambda1) << '\n'
     << "concave = " << flag(a.concave_ok) << '\n'
     << "initial_bc_residual = " << format_double(a.initial_bc_residual) << '\n';
  const auto failures = a.failures();
  for (std::size_t i = 0; i < failures.size(); ++i) os << "failure_" << i + 1 << " = " << failures[i] << '\n';
  if (res.bounds) {
    os << "udot_lo = " << format_double(res.bounds->udot_lo) << '\n'
       << "udot_hi = " << format_double(res.bounds->udot_hi) << '\n'
       << "mu = " << format_double(res.bounds->mu) << '\n'
       << "omega = " << format_double(res.bounds->omega) << '\n';
  }
  os << "\n[violations]\n";
  for (const auto& [which, count] : res.violation_counts) {
    double first_t = 0.0;
    double worst = 0.0;
    bool seen = false;
    for (const auto& v : res.violations) {
      if (v.estimate != which) continue;
      if (!seen) first_t = v.t;
      seen = true;
      worst = std::max(worst, v.margin);
    }
    os << which << " = count " << count << ", first_t " << format_double(first_t) << ", max_margin "
       << format_double(worst) << '\n';
  }
  os << '\n';
  write_config(os, ex.config);
}

/// Writes ledger.csv, final_state.txt and summary.txt into dir.
inline void write_outputs(const std::filesystem::path& dir, const Experiment& ex, const ExperimentResult& res) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error(ErrorKind::IoError, "cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open(kLedgerFile);
    write_ledger(os, res.ledger);
    if (!os) throw Error(ErrorKind::IoError, "write failed for ledger");
  }
  {
    auto os = open(kFinalStateFile);
    write_state(os, ex.grid, res.final_state);
  }
  {
    auto os = open(kSummaryFile);
    write_summary(os, ex, res);
    if (!os) throw Error(ErrorKind::IoError, "write failed for summary");
  }
}

/// Full `lagflow run`: messages go to err, the exit code is returned.
inline int run_experiment(const std::filesystem::path& config_path, int threads, std::ostream& err) {
  std::optional<Experiment> ex;
  try {
    ex = build_experiment(load_config(config_path));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  ExperimentResult res;
  try {
    res = execute(*ex, threads);
    write_outputs(ex->config.output_dir, *ex, res);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  switch (res.exit_code) {
    case kExitInadmissible:
      err << "inadmissible:";
      for (const auto& f : res.admissibility.failures()) err << ' ' << f << ';';
      if (!res.message.empty()) err << ' ' << res.message;
      err << '\n';
      break;
    case kExitViolation:
      if (!res.message.empty()) {
        err << "flow stopped: " << res.message << '\n';
      } else {
        err << res.violation_count << " estimate violation(s), see summary\n";
      }
      break;
    case kExitNotConverged:
      err << "not converged by t_max = " << format_double(ex->config.t_max) << '\n';
      break;
    default:
      break;
  }
  return res.exit_code;
}

}  // namespace lagflow
