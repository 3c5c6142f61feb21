#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "varcurve/io.hpp"
#include "varcurve/map.hpp"
#include "varcurve/mg1.hpp"
#include "varcurve/mm1k.hpp"
#include "varcurve/simulator.hpp"

namespace varcurve {

/// One reported quantity. When `check` is set it holds the same quantity
/// computed along an independent route.
struct ReportEntry {
  std::string name;
  double value = 0.0;
  std::string provenance;
  std::optional<double> check;
  std::string check_provenance;

  /// |value - check| / max(1, |value|, |check|); 0 without a check.
  double cross_check_error() const;
};

struct Report {
  std::string command;
  std::vector<std::pair<std::string, double>> parameters;
  std::vector<std::pair<std::string, std::string>> labels;
  std::vector<ReportEntry> entries;

  const ReportEntry& entry(std::string_view name) const;
  double max_cross_check_error() const;
  std::string to_json() const;
  CsvTable to_csv() const;
};

/// Initial phase distribution: "stationary", "alpha", "empty" (phase 0),
/// "full" (last phase), "e:<i>", "pmf:<p0>,<p1>,..." or "pmf:@<file>" where
/// the file holds a JSON array.
struct ThetaSpec {
  enum class Kind { Stationary, Alpha, Point, Last, Pmf } kind = Kind::Stationary;
  std::size_t index = 0;
  std::vector<double> pmf;
  std::string text = "stationary";
};
ThetaSpec parse_theta(std::string_view text);
PhaseDistribution resolve_theta(const ThetaSpec& spec, const MarkovArrivalProcess& map,
                                const DeviationBundle& bundle);

Report mm1k_report(const Mm1kParams& p, const ThetaSpec& theta);
Report mg1_report(const Mg1Params& p, std::optional<double> initial_variance);
Report map_report(const MapFile& file, const ThetaSpec& theta, bool transient_check);
Report renewal_report(double scv, double skewness);

enum class SweepKind { Intercept, Initial, Alpha, Covariance, Mg1 };

struct SweepSpec {
  SweepKind kind = SweepKind::Intercept;
  double service_rate = 1.0;
  std::vector<int> capacities;
  /// Arrival rates: the x axis for intercept/alpha/covariance, the curve
  /// parameter for initial.
  std::vector<double> lambdas;
  std::vector<double> rhos;  // mg1 only
  ServiceSpec service = Exponential{};
  /// Generic-MAP cross-checks are computed up to this capacity.
  int generic_max_capacity = 100;
};

std::optional<SweepKind> sweep_kind_from_string(std::string_view name);
SweepSpec default_sweep(SweepKind kind);
/// "varcurve-sweep/1" config file.
SweepSpec parse_sweep_config(std::string_view text, std::string_view source = "<sweep>");

/// Largest cross-check error is returned through max_error when not null.
CsvTable run_sweep(const SweepSpec& spec, double* max_error = nullptr);

/// (s, b*(s)) on a geometric grid for the counterexample service at the
/// given arrival rate.
CsvTable daley_scan(double arrival_rate, double s_min, double s_max, std::size_t points,
                    double* max_abs = nullptr);

struct SimulationOutput {
  VarianceCurveEstimate estimate;
  LinearTailFit fit;
  std::optional<double> reference_slope;
  std::optional<double> reference_intercept;
  std::string reference_source;
};

SimulationOutput run_simulation(const SimulationJob& job);
/// Columns t, mean, var, ci_lo, ci_hi.
CsvTable curve_csv(const VarianceCurveEstimate& est);
std::string simulation_summary_json(const SimulationJob& job, const SimulationOutput& out);

}  // namespace varcurve
