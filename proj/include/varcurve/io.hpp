#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "varcurve/map.hpp"
#include "varcurve/mg1.hpp"
#include "varcurve/simulator.hpp"

namespace varcurve {

inline constexpr std::string_view kMapFormat = "varcurve-map/1";
inline constexpr std::string_view kSimFormat = "varcurve-sim/1";
inline constexpr std::string_view kSweepFormat = "varcurve-sweep/1";

std::string read_text(const std::filesystem::path& path);

/// MAP file: {"format": "varcurve-map/1", "phases": n, "d0": [n*n],
/// "d1": [n*n], "labels": [n] (optional, default 0..n-1)}.
struct MapFile {
  MarkovArrivalProcess map;
  Vector labels;
};
MapFile parse_map(std::string_view text, std::string_view source = "<map>");
MapFile load_map(const std::filesystem::path& path);
std::string map_to_json(const MarkovArrivalProcess& map, std::span<const double> labels);

/// Service spec as a JSON object, e.g. {"family": "erlang", "shape": 2,
/// "rate": 2}. The README lists every family.
ServiceSpec parse_service(std::string_view text, std::string_view source = "<service>");

/// Simulation config file ("varcurve-sim/1").
struct SimulationJob {
  SimConfig config;
  double window_fraction = 0.5;
};
SimulationJob parse_sim_config(std::string_view text, std::string_view source = "<config>");
SimulationJob load_sim_config(const std::filesystem::path& path);

/// Evenly spaced points start, start + step, ... up to stop (inclusive
/// within a relative 1e-9 of step).
std::vector<double> arithmetic_grid(double start, double stop, double step);

/// Shortest round-trip decimal form, '.' separator, independent of locale.
std::string format_number(double x);

/// RFC 4180 table with a header row.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  void add_numbers(std::initializer_list<double> values);
  void add_numbers(const std::vector<double>& values);

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  void write(std::ostream& os) const;
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace varcurve
