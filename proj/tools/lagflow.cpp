#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "lagflow/lagflow.hpp"

namespace {

using namespace lagflow;

int print_table(const CheckTable& t) {
  t.print(std::cout);
  return t.all_pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lagflow: Lagrangian-angle type parabolic flow with second boundary condition"};
  app.require_subcommand(1);

  std::string config;
  int threads = 1;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config, "experiment config (INI)")->required();
  run->add_option("--threads", threads, "worker threads for the interior update")->check(CLI::Range(1, 256));

  std::string tau_text;
  int samples = 1000;
  std::uint64_t seed = 1;
  double s1 = 1.0, s2 = 2.0;
  auto* op = app.add_subcommand("check-operator", "operator invariants at random spectra");
  op->add_option("--tau", tau_text, "angle in (0, pi/2], e.g. 0.7853981634 or pi/4")->required();
  op->add_option("--samples", samples, "random spectra")->check(CLI::PositiveNumber);
  op->add_option("--seed", seed, "random seed");
  op->add_option("--s1", s1, "window parameter s1")->check(CLI::PositiveNumber);
  op->add_option("--s2", s2, "window parameter s2")->check(CLI::PositiveNumber);

  std::string ellipse, center = "0,0";
  double radius = 0.0;
  int domain_samples = 2000;
  auto* dom = app.add_subcommand("check-domain", "defining-function constants of a disc or ellipse");
  auto* ell_opt = dom->add_option("--ellipse", ellipse, "semi-axes a1,a2");
  auto* disc_opt = dom->add_option("--disc", radius, "radius")->check(CLI::PositiveNumber);
  ell_opt->excludes(disc_opt);
  dom->add_option("--center", center, "center x,y");
  dom->add_option("--samples", domain_samples, "boundary and interior samples")->check(CLI::Range(8, 10000000));
  dom->add_option("--seed", seed, "random seed");

  std::string field;
  double spacing = 1.0 / 32;
  auto* leg = app.add_subcommand("legendre-verify", "discrete Legendre transform checks on a test field");
  leg->add_option("--field", field, "quadratic:a,b | quartic | exp | radial")->required();
  leg->add_option("--spacing", spacing, "grid spacing")->check(CLI::PositiveNumber);
  leg->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*run) return run_experiment(config, threads, std::cerr);

  try {
    if (*op) {
      if (!(s1 < s2)) throw Error(ErrorKind::InvalidWindow, "s1 must be below s2");
      return print_table(check_operator(detail::parse_expression(tau_text, "--tau"), samples, seed, s1, s2));
    }
    if (*dom) {
      const Vec2 c = detail::parse_pair(center, "--center");
      if (!ellipse.empty()) {
        const Vec2 ax = detail::parse_pair(ellipse, "--ellipse");
        return print_table(check_domain(ConvexDomain::ellipse(c, ax.x, ax.y), domain_samples, seed));
      }
      if (radius > 0.0) return print_table(check_domain(ConvexDomain::disc(c, radius), domain_samples, seed));
      throw Error(ErrorKind::InvalidArgument, "one of --ellipse or --disc is required");
    }
    if (*leg) return print_table(legendre_verify(parse_field(field), spacing, threads));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
