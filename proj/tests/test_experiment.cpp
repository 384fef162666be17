#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lagflow/experiment.hpp"

using namespace lagflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lagflow_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path write_config_file(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.ini";
  std::ofstream(p) << body;
  return p;
}

std::string disc_config(const std::string& tau, const std::string& extra_flow = "",
                        const std::string& initial = "") {
  return "[operator]\ntau = " + tau +
         "\n[omega]\nkind = disc\nradius = 1\n[omega_tilde]\nkind = disc\nradius = 1\n"
         "[flow]\nspacing = 1/16\n" +
         extra_flow + "\n[initial]\n" + initial + "\n[output]\ndir = out\n";
}

}  // namespace

TEST(Experiment, StationaryDiscConverges) {
  const fs::path dir = scratch("stationary");
  std::ostringstream err;
  const int code = run_experiment(write_config_file(dir, disc_config("pi/2")), 1, err);
  EXPECT_EQ(code, kExitOk) << err.str();
  const std::string summary = slurp(dir / "out" / kSummaryFile);
  EXPECT_NE(summary.find("c_infinity = 1.5707963"), std::string::npos) << summary;
  EXPECT_NE(summary.find("converged = true"), std::string::npos);
  EXPECT_NE(summary.find("violations = 0"), std::string::npos);
  const std::string ledger = slurp(dir / "out" / kLedgerFile);
  EXPECT_EQ(ledger.rfind("t,dt,c_estimate,", 0), 0u);

  const auto ex = build_experiment(load_config(dir / "config.ini"));
  const FlowState fin = load_state((dir / "out" / kFinalStateFile).string(), ex.grid);
  for (int id : ex.grid.interior()) {
    EXPECT_EQ(fin.u[static_cast<std::size_t>(id)], ex.initial.u[static_cast<std::size_t>(id)]);
  }
}

TEST(Experiment, TauZeroIsConfigError) {
  const fs::path dir = scratch("tau0");
  std::ostringstream err;
  EXPECT_EQ(run_experiment(write_config_file(dir, disc_config("0")), 1, err), kExitConfig);
  EXPECT_NE(err.str().find("TauZeroUnsupported"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(dir / "out" / kSummaryFile));
}

TEST(Experiment, MissingConfigIsConfigError) {
  std::ostringstream err;
  EXPECT_EQ(run_experiment("/nonexistent/lagflow.ini", 1, err), kExitConfig);
}

TEST(Experiment, LargeOscillationIsInadmissible) {
  const fs::path dir = scratch("inadmissible");
  std::ostringstream err;
  const int code = run_experiment(write_config_file(dir, disc_config("pi/2", "kappa = 2,0")), 1, err);
  EXPECT_EQ(code, kExitInadmissible);
  const std::string summary = slurp(dir / "out" / kSummaryFile);
  EXPECT_NE(summary.find("admissible = false"), std::string::npos);
  EXPECT_NE(summary.find("steps = 0"), std::string::npos);
  // No flow: the ledger holds the header only.
  EXPECT_EQ(slurp(dir / "out" / kLedgerFile),
            "t,dt,c_estimate,osc_udot,min_eig,max_eig,mu,omega,obliq_min,obliq_identity_residual,bc_residual\n");
}

TEST(Experiment, NonConvexInitialIsInadmissible) {
  const fs::path dir = scratch("nonconvex");
  std::ostringstream err;
  const int code =
      run_experiment(write_config_file(dir, disc_config("pi/2", "", "bump_amplitude = 0.05\nbump_width = 0.08")), 1, err);
  EXPECT_EQ(code, kExitInadmissible);
  EXPECT_NE(err.str().find("not discretely convex"), std::string::npos) << err.str();
}

TEST(Experiment, ShortHorizonIsNotConverged) {
  const fs::path dir = scratch("short");
  std::ostringstream err;
  const int code = run_experiment(
      write_config_file(dir, disc_config("pi/2", "t_max = 0.01", "bump_amplitude = 0.02\nbump_width = 0.08")), 1, err);
  EXPECT_EQ(code, kExitNotConverged) << err.str();
  const std::string summary = slurp(dir / "out" / kSummaryFile);
  EXPECT_NE(summary.find("status = not_converged"), std::string::npos);
}

TEST(Experiment, BumpInitialFormula) {
  ExperimentConfig c;
  c.omega = {DomainKind::Disc, {0.0, 0.0}, 1.0, 1.0};
  c.omega_tilde = c.omega;
  c.spacing = 1.0 / 8;
  c.bump_amplitude = 0.02;
  c.bump_width = 0.08;
  c.offset = 1.0;
  const auto ex = build_experiment(c);
  for (int id : ex.grid.interior()) {
    const Vec2 x = ex.grid.position(id);
    EXPECT_DOUBLE_EQ(ex.initial.u[static_cast<std::size_t>(id)],
                     0.5 * dot(x, x) + 1.0 + 0.02 * std::exp(-dot(x, x) / 0.08));
  }
}

TEST(Experiment, SummaryRerunReproducesOutputs) {
  const fs::path dir = scratch("rerun");
  std::ostringstream err;
  const std::string cfg =
      disc_config("3*pi/8", "t_max = 0.02\nrecord_every = 3", "bump_amplitude = 0.02\nbump_width = 0.08");
  ASSERT_EQ(run_experiment(write_config_file(dir, cfg), 1, err), kExitNotConverged) << err.str();
  const std::string ledger = slurp(dir / "out" / kLedgerFile);
  const std::string state = slurp(dir / "out" / kFinalStateFile);
  const std::string summary = slurp(dir / "out" / kSummaryFile);
  fs::copy_file(dir / "out" / kSummaryFile, dir / "summary_as_config.ini");
  ASSERT_EQ(run_experiment(dir / "summary_as_config.ini", 1, err), kExitNotConverged) << err.str();
  EXPECT_EQ(slurp(dir / "out" / kLedgerFile), ledger);
  EXPECT_EQ(slurp(dir / "out" / kFinalStateFile), state);
  EXPECT_EQ(slurp(dir / "out" / kSummaryFile), summary);
}

TEST(Experiment, ThreadCountDoesNotChangeOutputs) {
  const fs::path a = scratch("threads1");
  const fs::path b = scratch("threads3");
  const std::string cfg = disc_config("pi/2", "t_max = 0.02", "bump_amplitude = 0.02\nbump_width = 0.08");
  std::ostringstream err;
  run_experiment(write_config_file(a, cfg), 1, err);
  run_experiment(write_config_file(b, cfg), 3, err);
  for (const char* f : {kLedgerFile, kFinalStateFile, kSummaryFile}) {
    const std::string sa = slurp(a / "out" / f);
    std::string sb = slurp(b / "out" / f);
    // The resolved output directory differs; nothing else may.
    if (std::string(f) == kSummaryFile) {
      const auto pos = sb.find((b / "out").string());
      ASSERT_NE(pos, std::string::npos);
      sb.replace(pos, (b / "out").string().size(), (a / "out").string());
    }
    EXPECT_EQ(sa, sb) << f;
  }
}

TEST(Experiment, LedgerRecordsEveryNthAndFinal) {
  const fs::path dir = scratch("record");
  std::ostringstream err;
  run_experiment(write_config_file(dir, disc_config("pi/2", "t_max = 0.01\nrecord_every = 4",
                                                    "bump_amplitude = 0.02\nbump_width = 0.08")),
                 1, err);
  std::istringstream is(slurp(dir / "out" / kLedgerFile));
  std::string line;
  std::getline(is, line);
  int rows = 0;
  double prev_t = -1;
  while (std::getline(is, line)) {
    ++rows;
    const double t = std::stod(line.substr(0, line.find(',')));
    EXPECT_GT(t, prev_t);
    prev_t = t;
  }
  const std::string summary = slurp(dir / "out" / kSummaryFile);
  const auto pos = summary.find("steps = ");
  const int steps = std::stoi(summary.substr(pos + 8));
  EXPECT_EQ(rows, steps / 4 + 1 + (steps % 4 ? 1 : 0));
  EXPECT_EQ(std::stod(summary.substr(summary.find("t_final = ") + 10)), prev_t);
}

TEST(Experiment, FileInitialWithOffset) {
  const fs::path dir = scratch("file_initial");
  ExperimentConfig c;
  c.omega = {DomainKind::Disc, {0.0, 0.0}, 1.0, 1.0};
  c.omega_tilde = c.omega;
  c.spacing = 1.0 / 16;
  const auto ex = build_experiment(c);
  save_state((dir / "u0.txt").string(), ex.grid, ex.initial);
  c.initial = InitialKind::File;
  c.initial_path = dir / "u0.txt";
  c.offset = 1.0;
  const auto ex2 = build_experiment(c);
  for (int id : ex.grid.interior()) {
    EXPECT_EQ(ex2.initial.u[static_cast<std::size_t>(id)], ex.initial.u[static_cast<std::size_t>(id)] + 1.0);
  }
}
