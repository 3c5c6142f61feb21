#pragma once

#include <complex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "varcurve/tolerances.hpp"

namespace varcurve {

struct Exponential {
  double rate = 1.0;
};

struct Deterministic {
  double value = 1.0;
};

struct Erlang {
  int shape = 1;
  double rate = 1.0;
};

struct HyperExponential {
  std::vector<double> weights;
  std::vector<double> rates;

  /// Two-phase fit with balanced means: each phase carries half the mean.
  static HyperExponential balanced(double mean, double scv);
};

/// Parameterized by mean and squared coefficient of variation. Moments and
/// sampling only; there is no closed-form transform.
struct LogNormal {
  double scv = 1.0;
  double mean = 1.0;

  double sigma() const;  // shape parameter of the underlying normal
  double location() const;
};

struct Atom {
  double weight = 0.0;
  double location = 0.0;
};

/// exp_weight * Exp(exp_rate) + sum_i weight_i * delta(location_i).
struct AtomMixturePlusExp {
  double exp_weight = 0.0;
  double exp_rate = 1.0;
  std::vector<Atom> atoms;
};

/// First three raw moments. g3 may be NaN when unknown; operations that need
/// it throw MissingThirdMoment.
struct RawMoments {
  double g1 = 1.0;
  double g2 = 2.0;
  double g3 = 6.0;

  /// From mean, squared coefficient of variation and skewness.
  static RawMoments from_shape(double mean, double scv, double skewness);
};

using ServiceSpec = std::variant<Exponential, Deterministic, Erlang, HyperExponential, LogNormal,
                                 AtomMixturePlusExp, RawMoments>;

void validate(const ServiceSpec& spec);
std::string describe(const ServiceSpec& spec);

struct ServiceMoments {
  double g1 = 0.0, g2 = 0.0, g3 = 0.0;
};
ServiceMoments service_moments(const ServiceSpec& spec);

struct ServiceStats {
  double rate = 0.0;  // 1 / g1
  double scv = 0.0;   // c^2
  // gamma * c^3 = E[(S - g1)^3] / g1^3. Finite for deterministic service,
  // where the skewness itself is undefined.
  double third = 0.0;

  double skewness() const;  // throws DegenerateDistribution when scv == 0
};
ServiceStats service_stats(const ServiceSpec& spec);

bool has_closed_form_lst(const ServiceSpec& spec);
double lst(const ServiceSpec& spec, double s);
std::complex<double> lst(const ServiceSpec& spec, std::complex<double> s);
/// d/ds G*(s).
double lst_derivative(const ServiceSpec& spec, double s);
/// Left end of the real half-line on which G* is finite (-inf if entire).
double lst_abscissa(const ServiceSpec& spec);

struct Mg1Params {
  double arrival_rate = 1.0;
  ServiceSpec service = Exponential{};

  double load() const;
  void validate() const;
  /// validate() plus rho < 1; UnstableQueue otherwise.
  void require_stable() const;
};

struct BusyPeriodMoments {
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;
};

struct BusyPeriodLst {
  double value = 0.0;
  long iterations = 0;
  bool newton = false;
};

BusyPeriodLst busy_period_lst(const Mg1Params& p, double s, const Tolerances& tol = kTolerances);
BusyPeriodMoments busy_period_moments(const Mg1Params& p);

/// Pollaczek-Khinchine generating function of the stationary number in system.
double queue_pgf(const Mg1Params& p, double z);
double stationary_queue_variance(const Mg1Params& p);

enum class InterceptKind { Stationary, Empty, Arbitrary };

/// intercept = coefficient * rho / (1 - rho)^2 for Stationary and
/// -(1 - coefficient) * rho / (1 - rho)^2 for Empty.
struct InterceptResult {
  double coefficient = 0.0;
  double intercept = 0.0;
  InterceptKind kind = InterceptKind::Stationary;
};

InterceptResult y_intercept_stationary(const Mg1Params& p);
InterceptResult y_intercept_empty(const Mg1Params& p);
/// Intercept when Q(0) has variance initial_variance.
double y_intercept_arbitrary(const Mg1Params& p, double initial_variance);
/// lim Cov(A(t), Q(t)).
double asymptotic_covariance_aq(const Mg1Params& p);

struct BStar {
  double value = 0.0;
  bool precision_loss = false;  // s below Tolerances::precision_loss_s
};
/// Transform of v(t) - lambda t.
BStar b_star(const Mg1Params& p, double s, const Tolerances& tol = kTolerances);
double v_star(const Mg1Params& p, double s);

/// Distance from 0 to the nearest singularity of the busy-period transform
/// on the negative real axis.
double busy_period_branch_distance(const Mg1Params& p);

/// lim_{s -> 0} b*(s) by polynomial extrapolation from a grid scaled to the
/// branch distance, evaluated in extended precision.
struct BStarLimit {
  double value = 0.0;
  std::vector<double> s;
  std::vector<double> b;
};
BStarLimit b_star_limit(const Mg1Params& p);

/// Exponential(1) mixed with atoms at 1/2, 3/2, 5/2, 9/2; moments (1, 2, 6).
AtomMixturePlusExp daley_counterexample();

enum class Mm1Regime { Stable, Critical, Overloaded };

/// Variance curve asymptote of the M/M/1 departure process from an empty
/// start. In the critical regime the curve has a square-root term.
struct Mm1Asymptote {
  Mm1Regime regime = Mm1Regime::Stable;
  double rate = 0.0;
  double intercept = 0.0;
  double root_coefficient = 0.0;  // multiplies sqrt(t); zero unless critical

  double evaluate(double t) const;
};
Mm1Asymptote mm1_variance_asymptote(double arrival_rate, double service_rate);

enum class RenewalMode { Equilibrium, Ordinary };

/// v(t) = rate_coefficient * alpha * t + intercept + o(1) for a renewal
/// process with rate alpha.
struct RenewalAsymptote {
  double rate_coefficient = 0.0;
  double intercept = 0.0;
};
RenewalAsymptote renewal_intercepts(double scv, double skewness, RenewalMode mode);

}  // namespace varcurve
