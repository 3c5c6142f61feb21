#pragma once

#include "varcurve/map.hpp"

namespace varcurve {

/// M/M/1/K queue: Poisson(arrival_rate) arrivals, exponential(service_rate)
/// service, at most `capacity` customers in the system.
struct Mm1kParams {
  double arrival_rate = 1.0;
  double service_rate = 1.0;
  int capacity = 1;

  double load() const { return arrival_rate / service_rate; }
  void validate() const;
};

/// Departure process as a (K+1)-phase MAP; phase = queue length.
MarkovArrivalProcess build_map(const Mm1kParams& p);

/// Queue-length labels 0..K, the default phase values for covariances.
Vector state_labels(const Mm1kParams& p);

Vector stationary_vector(const Mm1kParams& p);

/// Mean first entrance time from state i to state j.
double hitting_time(const Mm1kParams& p, int from, int to);

/// Mean first entrance time to state j from the stationary law.
double hitting_time_stationary(const Mm1kParams& p, int to);

/// Bottom-left entries of the deviation matrix and of its square.
struct DrazinCorners {
  double deviation = 0.0;          // Drazin_{K,0}, units of time
  double deviation_squared = 0.0;  // (Drazin^2)_{K,0}, units of time^2
};
DrazinCorners drazin_corners(const Mm1kParams& p);

/// Long-run departure rate.
double departure_rate(const Mm1kParams& p);

/// Stationary variance asymptote of the departure process.
VarianceAsymptote asymptote_closed_form(const Mm1kParams& p);

/// lim Cov(D(t), Q(t)) for the stationary queue.
double covariance_closed_form(const Mm1kParams& p);

double mean_queue_length(const Mm1kParams& p);

}  // namespace varcurve
