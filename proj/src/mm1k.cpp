#include "varcurve/mm1k.hpp"

#include <cmath>
#include <string>

#include "varcurve/errors.hpp"
#include "wide.hpp"

namespace varcurve {

using detail::integer_power;
using detail::Wide;

namespace {

// Evaluates a closed form given as a function of the load. The function
// handles rho == 1 through its own balanced branch; within unit_rho_switch of
// 1 (but not at 1) the balanced value is corrected to first order with a
// central difference, since the general branch is a 0/0 form there.
template <class Fn>
double across_unit_load(double rho, Fn&& f) {
  const double gap = rho - 1.0;
  if (gap == 0.0 || std::abs(gap) >= kTolerances.unit_rho_switch) {
    return static_cast<double>(f(Wide(rho)));
  }
  const Wide h(kTolerances.unit_rho_step);
  const Wide one(1);
  const Wide slope = (f(one + h) - f(one - h)) / (2 * h);
  return static_cast<double>(f(one) + Wide(gap) * slope);
}

void check_state(const Mm1kParams& p, int state, const char* what) {
  if (state < 0 || state > p.capacity) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " state " + std::to_string(state) +
                                                " outside 0.." + std::to_string(p.capacity));
  }
}

Wide pow_w(const Wide& base, long e) { return integer_power(base, e); }

}  // namespace

void Mm1kParams::validate() const {
  if (!(arrival_rate > 0.0) || !std::isfinite(arrival_rate)) {
    throw Error(ErrorCode::InvalidArgument, "arrival rate must be positive and finite");
  }
  if (!(service_rate > 0.0) || !std::isfinite(service_rate)) {
    throw Error(ErrorCode::InvalidArgument, "service rate must be positive and finite");
  }
  if (capacity < 1) throw Error(ErrorCode::InvalidArgument, "capacity must be at least 1");
}

MarkovArrivalProcess build_map(const Mm1kParams& p) {
  p.validate();
  const auto n = static_cast<std::size_t>(p.capacity) + 1;
  DenseMatrix d0(n, n), d1(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double exit = 0.0;
    if (i + 1 < n) {
      d0(i, i + 1) = p.arrival_rate;
      exit += p.arrival_rate;
    }
    if (i > 0) {
      d1(i, i - 1) = p.service_rate;
      exit += p.service_rate;
    }
    d0(i, i) = -exit;
  }
  return MarkovArrivalProcess(std::move(d0), std::move(d1));
}

Vector state_labels(const Mm1kParams& p) {
  Vector w(static_cast<std::size_t>(p.capacity) + 1);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i);
  return w;
}

Vector stationary_vector(const Mm1kParams& p) {
  p.validate();
  const long k = p.capacity;
  Vector pi(static_cast<std::size_t>(k) + 1);
  for (long i = 0; i <= k; ++i) {
    pi[static_cast<std::size_t>(i)] = across_unit_load(p.load(), [&](const Wide& r) -> Wide {
      if (r == 1) return Wide(1) / (k + 1);
      return (1 - r) / (1 - pow_w(r, k + 1)) * pow_w(r, i);
    });
  }
  return pi;
}

double hitting_time(const Mm1kParams& p, int from, int to) {
  p.validate();
  check_state(p, from, "origin");
  check_state(p, to, "target");
  if (from == to) return 0.0;
  const long k = p.capacity;
  const long i = from, j = to;
  const double scaled = across_unit_load(p.load(), [&](const Wide& r) -> Wide {
    if (r == 1) {
      if (i <= j) return Wide(j * (j + 1) - i * (i + 1)) / 2;
      return Wide((k - j) * (k - j + 1) - (k - i) * (k - i + 1)) / 2;
    }
    const Wide geometric = (pow_w(r, -j) - pow_w(r, -i)) / ((1 - r) * (1 - r));
    const Wide drift = Wide(i - j) / (1 - r);
    if (i <= j) return geometric + drift;
    return pow_w(r, k + 1) * geometric + drift;
  });
  return scaled / p.service_rate;
}

double hitting_time_stationary(const Mm1kParams& p, int to) {
  p.validate();
  check_state(p, to, "target");
  const long k = p.capacity;
  const long j = to;
  const double scaled = across_unit_load(p.load(), [&](const Wide& r) -> Wide {
    if (r == 1) return Wide(j * j - k * j) + Wide(k * k) / 3 + Wide(k) / 6;
    const Wide numerator = pow_w(r, -j) - (1 + 2 * j) * (1 - r) -
                           (1 + 2 * (k - j)) * (1 - r) * pow_w(r, k + 1) -
                           pow_w(r, 2 * (k + 1) - j);
    return numerator / ((1 - r) * (1 - r) * (1 - pow_w(r, k + 1)));
  });
  return scaled / p.service_rate;
}

namespace {

// Shared numerator of the (Drazin^2)_{K,0} and stationary intercept forms.
Wide intercept_numerator(const Wide& r, long k) {
  const Wide kk(k);
  return (6 * (1 + r * r) * (1 + kk) * (1 + kk) - 4 * r * (1 + 6 * kk + 3 * kk * kk)) *
             pow_w(r, k + 1) +
         r * r * (2 + 3 * kk + kk * kk) * (1 + pow_w(r, 2 * k)) -
         (2 * r * (3 + 2 * kk + kk * kk) * (1 + pow_w(r, 2 * (k + 1))) -
          kk * (1 + kk) * (1 + pow_w(r, 2 * (k + 2))));
}

Wide balanced_quartic(long k) {
  const Wide kk(k);
  return 7 * pow_w(kk, 4) + 28 * pow_w(kk, 3) + 37 * kk * kk + 18 * kk;
}

}  // namespace

DrazinCorners drazin_corners(const Mm1kParams& p) {
  p.validate();
  const long k = p.capacity;
  DrazinCorners c;
  c.deviation = -across_unit_load(p.load(), [&](const Wide& r) -> Wide {
                  if (r == 1) return Wide(k * (k + 2)) / (6 * (k + 1));
                  const Wide rk1 = pow_w(r, k + 1);
                  return (k * (1 - r) * (1 + rk1) - 2 * r * (1 - pow_w(r, k))) /
                         ((1 - r) * (1 - rk1) * (1 - rk1));
                }) /
                p.service_rate;
  c.deviation_squared = -across_unit_load(p.load(), [&](const Wide& r) -> Wide {
                          if (r == 1) return balanced_quartic(k) / (360 * (k + 1));
                          const Wide a = 1 - r;
                          const Wide b = 1 - pow_w(r, k + 1);
                          return intercept_numerator(r, k) / (2 * a * a * a * b * b * b);
                        }) /
                        (p.service_rate * p.service_rate);
  return c;
}

double departure_rate(const Mm1kParams& p) {
  p.validate();
  const long k = p.capacity;
  return p.service_rate * across_unit_load(p.load(), [&](const Wide& r) -> Wide {
           if (r == 1) return Wide(k) / (k + 1);
           return r * (1 - pow_w(r, k)) / (1 - pow_w(r, k + 1));
         });
}

VarianceAsymptote asymptote_closed_form(const Mm1kParams& p) {
  p.validate();
  const long k = p.capacity;
  VarianceAsymptote a;
  a.event_rate = departure_rate(p);
  a.rate = p.arrival_rate * across_unit_load(p.load(), [&](const Wide& r) -> Wide {
             if (r == 1) return Wide(2) / 3 - Wide(3 * k + 2) / (3 * (k + 1) * (k + 1));
             const Wide rk1 = pow_w(r, k + 1);
             const Wide b = 1 - rk1;
             return (1 + rk1) * (1 - (1 + 2 * k) * pow_w(r, k) * (1 - r) - pow_w(r, 2 * k + 1)) /
                    (b * b * b);
           });
  a.intercept = across_unit_load(p.load(), [&](const Wide& r) -> Wide {
    if (r == 1) return balanced_quartic(k) / (180 * (k + 1) * (k + 1));
    const Wide a1 = 1 - r;
    const Wide b = 1 - pow_w(r, k + 1);
    return pow_w(r, k + 1) * intercept_numerator(r, k) / (a1 * a1 * pow_w(b, 4));
  });
  return a;
}

double covariance_closed_form(const Mm1kParams& p) {
  p.validate();
  const long k = p.capacity;
  return across_unit_load(p.load(), [&](const Wide& r) -> Wide {
    if (r == 1) return -Wide(k * (k + 2)) / 24;
    const Wide kk(k);
    const Wide rk = pow_w(r, k);
    const Wide rk1 = rk * r;
    const Wide rk2 = rk1 * r;
    const Wide d = r - 1;
    const Wide numerator = kk * kk * d * d * (1 + 3 * rk1) - 2 * r * (rk - 1) * (-2 + r + rk2) +
                           kk * d * (-1 + 3 * r - 7 * rk1 + 5 * rk2);
    return rk1 * numerator / (2 * d * d * pow_w(rk1 - 1, 3));
  });
}

double mean_queue_length(const Mm1kParams& p) {
  p.validate();
  const long k = p.capacity;
  return across_unit_load(p.load(), [&](const Wide& r) -> Wide {
    if (r == 1) return Wide(k) / 2;
    return r * (1 - (1 + k) * pow_w(r, k) + k * pow_w(r, k + 1)) / ((1 - r) * (1 - pow_w(r, k + 1)));
  });
}

}  // namespace varcurve
