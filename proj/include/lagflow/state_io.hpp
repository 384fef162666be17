#pragma once

// Plain-text node-value files:
//
//   <tag> v1 <nx> <ny> <spacing> <t>
//   <i> <j> <value>
//   ...
//
// Numbers are written in shortest round-trip form.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lagflow/error.hpp"
#include "lagflow/flow.hpp"
#include "lagflow/grid.hpp"

namespace lagflow {

inline constexpr std::string_view kStateTag = "lagflow-state";
inline constexpr std::string_view kDualTag = "lagflow-dual";

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::IoError, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

/// Writes the nodes selected by keep(id) in ascending id order.
template <typename Keep>
void write_node_values(std::ostream& os, std::string_view tag, const FlowGrid& grid, std::span<const double> values,
                       double t, Keep&& keep) {
  os << tag << " v1 " << grid.nx() << ' ' << grid.ny() << ' ' << format_double(grid.spacing()) << ' '
     << format_double(t) << '\n';
  for (int id = 0; id < grid.size(); ++id) {
    if (!keep(id)) continue;
    os << grid.col(id) << ' ' << grid.row(id) << ' ' << format_double(values[static_cast<std::size_t>(id)]) << '\n';
  }
  if (!os) throw Error(ErrorKind::IoError, "write failed");
}

struct NodeValues {
  double t = 0.0;
  std::vector<double> values;  // per grid node
  std::vector<char> present;   // per grid node
};

/// Reads a node-value file written for this grid. Grid dimensions and
/// spacing must match exactly.
inline NodeValues read_node_values(std::istream& is, std::string_view tag, const FlowGrid& grid) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::IoError, "empty node-value file");
  std::istringstream head(line);
  std::string got_tag, version, spacing, t;
  int nx = 0, ny = 0;
  if (!(head >> got_tag >> version >> nx >> ny >> spacing >> t) || got_tag != tag || version != "v1") {
    throw Error(ErrorKind::IoError, "bad header, expected '" + std::string(tag) + " v1 nx ny spacing t'");
  }
  if (nx != grid.nx() || ny != grid.ny() || parse_double(spacing) != grid.spacing()) {
    throw Error(ErrorKind::IoError, "file grid " + std::to_string(nx) + "x" + std::to_string(ny) + " spacing " +
                                        spacing + " does not match the configured grid");
  }
  NodeValues out;
  out.t = parse_double(t);
  out.values.assign(static_cast<std::size_t>(grid.size()), 0.0);
  out.present.assign(static_cast<std::size_t>(grid.size()), 0);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    int i = -1, j = -1;
    std::string value;
    if (!(row >> i >> j >> value) || !grid.in_range(i, j)) {
      throw Error(ErrorKind::IoError, "malformed node line " + std::to_string(lineno));
    }
    const auto id = static_cast<std::size_t>(grid.id(i, j));
    out.values[id] = parse_double(value);
    out.present[id] = 1;
  }
  return out;
}

inline void write_state(std::ostream& os, const FlowGrid& grid, const FlowState& state) {
  write_node_values(os, kStateTag, grid, state.u, state.t,
                    [&](int id) { return grid.classify(id) != NodeClass::Exterior; });
}

/// Every non-Exterior node must be present.
inline FlowState read_state(std::istream& is, const FlowGrid& grid) {
  NodeValues nv = read_node_values(is, kStateTag, grid);
  for (int id = 0; id < grid.size(); ++id) {
    if (grid.classify(id) != NodeClass::Exterior && !nv.present[static_cast<std::size_t>(id)]) {
      throw Error(ErrorKind::IoError, "state file misses node (" + std::to_string(grid.col(id)) + ", " +
                                          std::to_string(grid.row(id)) + ")");
    }
  }
  FlowState s;
  s.u = std::move(nv.values);
  s.t = nv.t;
  return s;
}

inline void save_state(const std::string& path, const FlowGrid& grid, const FlowState& state) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  write_state(os, grid, state);
}

inline FlowState load_state(const std::string& path, const FlowGrid& grid) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::IoError, "cannot open " + path);
  return read_state(is, grid);
}

}  // namespace lagflow
