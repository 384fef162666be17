#pragma once

// Experiment configuration: flat INI text.
//
//   [operator]     tau = pi/2            (number, "pi", products and quotients)
//   [omega]        kind = disc|ellipse, center = x,y, radius = r | semi_axes = a1,a2
//   [omega_tilde]  same keys as [omega]
//   [flow]         spacing, cfl, kappa = k1,k2, tol_c, tol_bc, t_max,
//                  record_every, max_sweeps, c2_bound
//   [initial]      kind = quadratic|file, path, offset, bump_amplitude, bump_width
//   [output]       dir
//   [run]          seed
//
// Relative paths resolve against the directory of the config file.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>

#include "lagflow/domains.hpp"
#include "lagflow/error.hpp"
#include "lagflow/operators.hpp"
#include "lagflow/state_io.hpp"
#include "lagflow/vec2.hpp"

namespace lagflow {

struct DomainSpec {
  DomainKind kind = DomainKind::Disc;
  Vec2 center{};
  double a1 = 1.0;
  double a2 = 1.0;

  ConvexDomain build() const {
    return kind == DomainKind::Disc ? ConvexDomain::disc(center, a1) : ConvexDomain::ellipse(center, a1, a2);
  }
};

enum class InitialKind { Quadratic, File };

struct ExperimentConfig {
  double tau = kPi / 2;
  DomainSpec omega;
  DomainSpec omega_tilde;
  double spacing = 1.0 / 32;
  double cfl = 0.5;
  Vec2 kappa{};
  double tol_c = 1e-8;
  double tol_bc = 1e-10;
  double t_max = 100.0;
  int record_every = 1;
  int max_sweeps = 20;
  double c2_bound = 100.0;
  InitialKind initial = InitialKind::Quadratic;
  std::filesystem::path initial_path;
  double offset = 0.0;
  double bump_amplitude = 0.0;
  double bump_width = 0.08;  // u0 += A exp(-|x - center|^2 / width)
  std::filesystem::path output_dir = "output";
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_factor(const std::string& s, const std::string& key) {
  if (s == "pi") return kPi;
  try {
    return parse_double(s);
  } catch (const Error&) {
    throw Error(ErrorKind::ConfigError, key + ": cannot parse '" + s + "'");
  }
}

/// "0.7", "pi", "pi/2", "3*pi/8", "3pi/8".
inline double parse_expression(std::string_view text, const std::string& key) {
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != '\t') s += c;
  }
  if (s.empty()) throw Error(ErrorKind::ConfigError, key + ": empty value");
  double value = 1.0;
  char op = '*';
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find_first_of("*/", pos);
    if (next == std::string::npos) next = s.size();
    std::string tok = s.substr(pos, next - pos);
    double f = 1.0;
    if (tok.size() > 2 && tok.compare(tok.size() - 2, 2, "pi") == 0) {
      f = parse_factor(tok.substr(0, tok.size() - 2), key) * kPi;
    } else {
      f = parse_factor(tok, key);
    }
    value = op == '*' ? value * f : value / f;
    if (next == s.size()) break;
    op = s[next];
    pos = next + 1;
  }
  if (!std::isfinite(value)) throw Error(ErrorKind::ConfigError, key + ": not finite");
  return value;
}

inline Vec2 parse_pair(const std::string& text, const std::string& key) {
  const auto comma = text.find(',');
  if (comma == std::string::npos || text.find(',', comma + 1) != std::string::npos) {
    throw Error(ErrorKind::ConfigError, key + ": expected 'x,y', got '" + text + "'");
  }
  return {parse_expression(text.substr(0, comma), key), parse_expression(text.substr(comma + 1), key)};
}

inline std::string format_pair(Vec2 v) { return format_double(v.x) + "," + format_double(v.y); }

class Section {
 public:
  Section(const boost::property_tree::ptree* node, std::string name, std::set<std::string> allowed)
      : node_(node), name_(std::move(name)), allowed_(std::move(allowed)) {
    if (!node_) return;
    for (const auto& [key, child] : *node_) {
      if (!child.empty()) throw Error(ErrorKind::ConfigError, "[" + name_ + "] nested key " + key);
      if (!allowed_.count(key)) throw Error(ErrorKind::ConfigError, "[" + name_ + "] unknown key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return node_ && node_->get_child_optional(key); }

  std::string text(const std::string& key) const {
    if (!has(key)) throw Error(ErrorKind::ConfigError, "[" + name_ + "] missing key '" + key + "'");
    return trim(node_->get<std::string>(key));
  }

  double number(const std::string& key, double fallback) const {
    return has(key) ? parse_expression(text(key), label(key)) : fallback;
  }

  double number(const std::string& key) const { return parse_expression(text(key), label(key)); }

  Vec2 pair(const std::string& key, Vec2 fallback) const { return has(key) ? parse_pair(text(key), label(key)) : fallback; }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const std::string t = text(key);
    long long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
      throw Error(ErrorKind::ConfigError, label(key) + ": expected an integer, got '" + t + "'");
    }
    return v;
  }

  std::string label(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  const boost::property_tree::ptree* node_;
  std::string name_;
  std::set<std::string> allowed_;
};

inline DomainSpec parse_domain(const Section& s, const std::string& name) {
  DomainSpec d;
  const std::string kind = s.text("kind");
  d.center = s.pair("center", {0.0, 0.0});
  if (kind == "disc") {
    if (s.has("semi_axes")) throw Error(ErrorKind::ConfigError, "[" + name + "] a disc takes 'radius'");
    d.kind = DomainKind::Disc;
    d.a1 = d.a2 = s.number("radius");
  } else if (kind == "ellipse") {
    if (s.has("radius")) throw Error(ErrorKind::ConfigError, "[" + name + "] an ellipse takes 'semi_axes'");
    d.kind = DomainKind::AxisEllipse;
    const Vec2 ax = s.pair("semi_axes", {0.0, 0.0});
    d.a1 = ax.x;
    d.a2 = ax.y;
  } else {
    throw Error(ErrorKind::ConfigError, "[" + name + "] kind must be disc or ellipse, got '" + kind + "'");
  }
  d.build();  // validates the parameters
  return d;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::ConfigError, what);
}

}  // namespace detail

/// Sections written into summaries; ignored when a summary is read back as a config.
inline const std::set<std::string>& report_sections() {
  static const std::set<std::string> s{"summary", "admissibility", "violations"};
  return s;
}

inline ExperimentConfig parse_config(std::istream& is, const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::ConfigError, e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  static const std::set<std::string> known{"operator", "omega", "omega_tilde", "flow", "initial", "output", "run"};
  for (const auto& [name, child] : tree) {
    if (child.empty() && !child.data().empty()) throw Error(ErrorKind::ConfigError, "key '" + name + "' outside a section");
    if (!known.count(name) && !report_sections().count(name)) {
      throw Error(ErrorKind::ConfigError, "unknown section [" + name + "]");
    }
  }
  auto section = [&](const std::string& name, std::set<std::string> keys) {
    return detail::Section(tree.get_child_optional(name).get_ptr(), name, std::move(keys));
  };
  using detail::require;

  ExperimentConfig c;
  const auto op = section("operator", {"tau"});
  c.tau = op.number("tau");
  Tau{c.tau};  // TauZeroUnsupported / range errors carry their own kind

  const std::set<std::string> domain_keys{"kind", "center", "radius", "semi_axes"};
  c.omega = detail::parse_domain(section("omega", domain_keys), "omega");
  c.omega_tilde = detail::parse_domain(section("omega_tilde", domain_keys), "omega_tilde");

  const auto flow = section("flow", {"spacing", "cfl", "kappa", "tol_c", "tol_bc", "t_max", "record_every",
                                     "max_sweeps", "c2_bound"});
  c.spacing = flow.number("spacing");
  c.cfl = flow.number("cfl", c.cfl);
  c.kappa = flow.pair("kappa", c.kappa);
  c.tol_c = flow.number("tol_c", c.tol_c);
  c.tol_bc = flow.number("tol_bc", c.tol_bc);
  c.t_max = flow.number("t_max", c.t_max);
  c.record_every = static_cast<int>(flow.integer("record_every", c.record_every));
  c.max_sweeps = static_cast<int>(flow.integer("max_sweeps", c.max_sweeps));
  c.c2_bound = flow.number("c2_bound", c.c2_bound);
  require(c.spacing > 0.0, "[flow] spacing must be positive");
  require(c.cfl > 0.0 && c.cfl <= 1.0, "[flow] cfl must lie in (0, 1]");
  require(c.tol_c > 0.0, "[flow] tol_c must be positive");
  require(c.tol_bc > 0.0, "[flow] tol_bc must be positive");
  require(c.t_max > 0.0, "[flow] t_max must be positive");
  require(c.record_every >= 1, "[flow] record_every must be at least 1");
  require(c.max_sweeps >= 1, "[flow] max_sweeps must be at least 1");
  require(c.c2_bound > 1.0, "[flow] c2_bound must exceed 1");

  const auto init = section("initial", {"kind", "path", "offset", "bump_amplitude", "bump_width"});
  const std::string kind = init.has("kind") ? init.text("kind") : "quadratic";
  if (kind == "quadratic") {
    c.initial = InitialKind::Quadratic;
    require(!init.has("path"), "[initial] path is only used with kind = file");
  } else if (kind == "file") {
    c.initial = InitialKind::File;
    c.initial_path = (base_dir / init.text("path")).lexically_normal();
    require(!init.has("bump_amplitude"), "[initial] bump_amplitude is only used with kind = quadratic");
  } else {
    throw Error(ErrorKind::ConfigError, "[initial] kind must be quadratic or file, got '" + kind + "'");
  }
  c.offset = init.number("offset", c.offset);
  c.bump_amplitude = init.number("bump_amplitude", c.bump_amplitude);
  c.bump_width = init.number("bump_width", c.bump_width);
  require(c.bump_width > 0.0, "[initial] bump_width must be positive");

  const auto out = section("output", {"dir"});
  c.output_dir = (base_dir / (out.has("dir") ? out.text("dir") : c.output_dir.string())).lexically_normal();

  const auto run = section("run", {"seed"});
  const long long seed = run.integer("seed", 0);
  require(seed >= 0, "[run] seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::IoError, "cannot open config " + path.string());
  return parse_config(is, std::filesystem::absolute(path).parent_path());
}

/// Fully resolved config; parse_config reads it back to an equal value.
inline void write_config(std::ostream& os, const ExperimentConfig& c) {
  auto domain = [&](const char* name, const DomainSpec& d) {
    os << '[' << name << "]\n";
    if (d.kind == DomainKind::Disc) {
      os << "kind = disc\ncenter = " << detail::format_pair(d.center) << "\nradius = " << format_double(d.a1) << '\n';
    } else {
      os << "kind = ellipse\ncenter = " << detail::format_pair(d.center)
         << "\nsemi_axes = " << detail::format_pair({d.a1, d.a2}) << '\n';
    }
    os << '\n';
  };
  os << "[operator]\ntau = " << format_double(c.tau) << "\n\n";
  domain("omega", c.omega);
  domain("omega_tilde", c.omega_tilde);
  os << "[flow]\n"
     << "spacing = " << format_double(c.spacing) << '\n'
     << "cfl = " << format_double(c.cfl) << '\n'
     << "kappa = " << detail::format_pair(c.kappa) << '\n'
     << "tol_c = " << format_double(c.tol_c) << '\n'
     << "tol_bc = " << format_double(c.tol_bc) << '\n'
     << "t_max = " << format_double(c.t_max) << '\n'
     << "record_every = " << c.record_every << '\n'
     << "max_sweeps = " << c.max_sweeps << '\n'
     << "c2_bound = " << format_double(c.c2_bound) << "\n\n";
  os << "[initial]\n";
  if (c.initial == InitialKind::Quadratic) {
    os << "kind = quadratic\n"
       << "bump_amplitude = " << format_double(c.bump_amplitude) << '\n';
  } else {
    os << "kind = file\npath = " << c.initial_path.string() << '\n';
  }
  os << "offset = " << format_double(c.offset) << '\n'
     << "bump_width = " << format_double(c.bump_width) << "\n\n";
  os << "[output]\ndir = " << c.output_dir.string() << "\n\n";
  os << "[run]\nseed = " << c.seed << '\n';
}

}  // namespace lagflow
