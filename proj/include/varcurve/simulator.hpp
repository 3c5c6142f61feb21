#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "varcurve/mg1.hpp"
#include "varcurve/mm1k.hpp"

namespace varcurve {

using SimModel = std::variant<Mm1kParams, Mg1Params>;

struct EmptyStart {};
struct FixedStart {
  int level = 0;
};
/// Initial queue length drawn from pmf[0..].
struct PmfStart {
  std::vector<double> pmf;
};
/// Run from empty over [-duration, 0] and start counting at 0.
struct WarmupStart {
  double duration = 3e4;
};
/// Queue length just after a departure in steady state (M/M/1/K only).
struct EventStationaryStart {};

using InitialCondition =
    std::variant<EmptyStart, FixedStart, PmfStart, WarmupStart, EventStationaryStart>;

struct SimConfig {
  SimModel model = Mm1kParams{};
  InitialCondition initial = EmptyStart{};
  std::vector<double> grid;
  std::uint32_t replications = 2;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0: OpenMP default
};

void validate(const SimConfig& cfg);

/// Exact stationary start: the stationary pmf for M/M/1/K, a default warm-up
/// for M/G/1.
InitialCondition stationary_start(const SimModel& model);

/// Departure counts D(t_g), replication-major.
struct CountMatrix {
  std::size_t replications = 0;
  std::size_t points = 0;
  std::vector<std::uint32_t> values;

  std::uint32_t operator()(std::size_t r, std::size_t g) const { return values[r * points + g]; }
  std::span<const std::uint32_t> row(std::size_t r) const {
    return {values.data() + r * points, points};
  }
};

CountMatrix simulate_counts(const SimConfig& cfg);
/// Single-threaded reference; bit-identical to simulate_counts.
CountMatrix simulate_counts_serial(const SimConfig& cfg);

/// One replication with the quantities needed to check D = A + Q(0) - Q.
struct ReplicationTrace {
  std::uint32_t initial_queue = 0;
  std::vector<std::uint32_t> departures;
  std::vector<std::uint32_t> admitted;
  std::vector<std::uint32_t> queue;
};
ReplicationTrace simulate_replication(const SimConfig& cfg, std::uint32_t replication);

struct VarianceCurveEstimate {
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> half_width;  // 95% normal interval
  std::size_t replications = 0;

  // Per group g and point i: count, sum and sum of squares, kept so fits can
  // be jackknifed by deleting one group at a time. Empty when unavailable.
  std::size_t groups = 0;
  std::vector<double> group_n;
  std::vector<double> group_sum;
  std::vector<double> group_sum_sq;

  double ci_low(std::size_t i) const { return variance[i] - half_width[i]; }
  double ci_high(std::size_t i) const { return variance[i] + half_width[i]; }
};

VarianceCurveEstimate estimate_variance_curve(const CountMatrix& counts,
                                              std::span<const double> grid,
                                              std::size_t groups = 50);

struct LinearTailFit {
  double slope = 0.0;
  double intercept = 0.0;
  double t_low = 0.0;
  double t_high = 0.0;
  std::size_t points = 0;
  double residual_rms = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  enum class ErrorMethod { Jackknife, Model, Residual } error_method = ErrorMethod::Residual;
};

/// Weighted least squares over the last window_fraction of the grid, with
/// weights 1 / half_width^2 (unit weights when any width is zero).
LinearTailFit fit_linear_tail(const VarianceCurveEstimate& est, double window_fraction);

}  // namespace varcurve
