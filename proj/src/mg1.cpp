#include "varcurve/mg1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "varcurve/errors.hpp"
#include "wide.hpp"

namespace varcurve {

using detail::integer_power;
using detail::Wide50;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

bool positive(double x) { return x > 0.0 && std::isfinite(x); }

template <class T>
T lst_value(const ServiceSpec& spec, const T& s) {
  using std::exp;
  return std::visit(
      overloaded{
          [&](const Exponential& e) -> T { return T(e.rate) / (T(e.rate) + s); },
          [&](const Deterministic& d) -> T { return exp(-s * T(d.value)); },
          [&](const Erlang& e) -> T { return integer_power(T(e.rate) / (T(e.rate) + s), e.shape); },
          [&](const HyperExponential& h) -> T {
            T sum(0);
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              sum += T(h.weights[i]) * T(h.rates[i]) / (T(h.rates[i]) + s);
            }
            return sum;
          },
          [&](const AtomMixturePlusExp& m) -> T {
            T sum = T(m.exp_weight) * T(m.exp_rate) / (T(m.exp_rate) + s);
            for (const Atom& a : m.atoms) sum += T(a.weight) * exp(-s * T(a.location));
            return sum;
          },
          [&](const auto&) -> T {
            throw Error(ErrorCode::NoClosedFormLST, describe(spec) + " has no closed-form transform");
          }},
      spec);
}

template <class T>
T lst_slope(const ServiceSpec& spec, const T& s) {
  using std::exp;
  return std::visit(
      overloaded{
          [&](const Exponential& e) -> T {
            const T d = T(e.rate) + s;
            return -T(e.rate) / (d * d);
          },
          [&](const Deterministic& d) -> T { return -T(d.value) * exp(-s * T(d.value)); },
          [&](const Erlang& e) -> T {
            return -T(e.shape) / T(e.rate) *
                   integer_power(T(e.rate) / (T(e.rate) + s), e.shape + 1);
          },
          [&](const HyperExponential& h) -> T {
            T sum(0);
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              const T d = T(h.rates[i]) + s;
              sum -= T(h.weights[i]) * T(h.rates[i]) / (d * d);
            }
            return sum;
          },
          [&](const AtomMixturePlusExp& m) -> T {
            const T d = T(m.exp_rate) + s;
            T sum = -T(m.exp_weight) * T(m.exp_rate) / (d * d);
            for (const Atom& a : m.atoms) {
              sum -= T(a.weight) * T(a.location) * exp(-s * T(a.location));
            }
            return sum;
          },
          [&](const auto&) -> T {
            throw Error(ErrorCode::NoClosedFormLST, describe(spec) + " has no closed-form transform");
          }},
      spec);
}

void require_lst(const ServiceSpec& spec) {
  if (!has_closed_form_lst(spec)) {
    throw Error(ErrorCode::NoClosedFormLST, describe(spec) + " has no closed-form transform");
  }
}

void require_third_moment(const ServiceMoments& m) {
  if (!std::isfinite(m.g3)) {
    throw Error(ErrorCode::MissingThirdMoment, "third service moment is required");
  }
}

// rho, c^2 and gamma c^3 for the intercept formulas.
struct Shape {
  double rho, c2, gc3;
};

Shape stable_shape(const Mg1Params& p) {
  p.require_stable();
  const ServiceMoments m = service_moments(p.service);
  require_third_moment(m);
  const ServiceStats st = service_stats(p.service);
  return {p.load(), st.scv, st.third};
}

double load_factor(double rho) { return rho / ((1.0 - rho) * (1.0 - rho)); }

}  // namespace

HyperExponential HyperExponential::balanced(double mean, double scv) {
  require(positive(mean), "hyperexponential mean must be positive");
  require(scv >= 1.0 && std::isfinite(scv), "balanced hyperexponential needs scv >= 1");
  const double p = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
  return {{p, 1.0 - p}, {2.0 * p / mean, 2.0 * (1.0 - p) / mean}};
}

double LogNormal::sigma() const { return std::sqrt(std::log1p(scv)); }
double LogNormal::location() const { return std::log(mean) - 0.5 * std::log1p(scv); }

RawMoments RawMoments::from_shape(double mean, double scv, double skewness) {
  require(positive(mean), "mean must be positive");
  require(scv >= 0.0 && std::isfinite(scv), "scv must be nonnegative");
  const double g1 = mean;
  const double g2 = mean * mean * (1.0 + scv);
  const double g3 = skewness * std::pow(g2 - g1 * g1, 1.5) + 3.0 * g1 * g2 - 2.0 * g1 * g1 * g1;
  return {g1, g2, g3};
}

void validate(const ServiceSpec& spec) {
  std::visit(
      overloaded{
          [](const Exponential& e) { require(positive(e.rate), "exponential rate must be positive"); },
          [](const Deterministic& d) {
            require(positive(d.value), "deterministic service time must be positive");
          },
          [](const Erlang& e) {
            require(e.shape >= 1, "Erlang shape must be at least 1");
            require(positive(e.rate), "Erlang rate must be positive");
          },
          [](const HyperExponential& h) {
            require(!h.rates.empty() && h.rates.size() == h.weights.size(),
                    "hyperexponential needs matching, nonempty weights and rates");
            double total = 0.0;
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              require(positive(h.rates[i]), "hyperexponential rates must be positive");
              require(h.weights[i] >= 0.0, "hyperexponential weights must be nonnegative");
              total += h.weights[i];
            }
            require(std::abs(total - 1.0) <= 1e-12, "hyperexponential weights must sum to 1");
          },
          [](const LogNormal& l) {
            require(positive(l.scv), "lognormal scv must be positive");
            require(positive(l.mean), "lognormal mean must be positive");
          },
          [](const AtomMixturePlusExp& m) {
            require(m.exp_weight >= 0.0 && m.exp_weight <= 1.0, "exponential weight must lie in [0, 1]");
            require(positive(m.exp_rate), "exponential rate must be positive");
            double total = m.exp_weight;
            for (const Atom& a : m.atoms) {
              require(a.weight >= 0.0, "atom weights must be nonnegative");
              require(a.location >= 0.0 && std::isfinite(a.location), "atom locations must be >= 0");
              total += a.weight;
            }
            require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");
            require(m.exp_weight > 0.0 ||
                        std::any_of(m.atoms.begin(), m.atoms.end(),
                                    [](const Atom& a) { return a.weight > 0.0 && a.location > 0.0; }),
                    "mixture must have positive mean");
          },
          [](const RawMoments& r) {
            require(positive(r.g1), "g1 must be positive");
            require(std::isfinite(r.g2) && r.g2 >= r.g1 * r.g1, "g2 must satisfy g2 >= g1^2");
            require(std::isnan(r.g3) || positive(r.g3), "g3 must be positive or absent");
          }},
      spec);
}

std::string describe(const ServiceSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const Exponential& e) { os << "exponential(rate=" << e.rate << ")"; },
                 [&](const Deterministic& d) { os << "deterministic(" << d.value << ")"; },
                 [&](const Erlang& e) { os << "erlang(k=" << e.shape << ", rate=" << e.rate << ")"; },
                 [&](const HyperExponential& h) { os << "hyperexponential(" << h.rates.size() << " phases)"; },
                 [&](const LogNormal& l) { os << "lognormal(scv=" << l.scv << ", mean=" << l.mean << ")"; },
                 [&](const AtomMixturePlusExp& m) {
                   os << "atom-mixture(exp_weight=" << m.exp_weight << ", " << m.atoms.size() << " atoms)";
                 },
                 [&](const RawMoments& r) {
                   os << "moments(" << r.g1 << ", " << r.g2 << ", " << r.g3 << ")";
                 }},
             spec);
  return os.str();
}

ServiceMoments service_moments(const ServiceSpec& spec) {
  validate(spec);
  return std::visit(
      overloaded{
          [](const Exponential& e) -> ServiceMoments {
            const double m = 1.0 / e.rate;
            return {m, 2.0 * m * m, 6.0 * m * m * m};
          },
          [](const Deterministic& d) -> ServiceMoments {
            return {d.value, d.value * d.value, d.value * d.value * d.value};
          },
          [](const Erlang& e) -> ServiceMoments {
            const double k = e.shape, r = e.rate;
            return {k / r, k * (k + 1) / (r * r), k * (k + 1) * (k + 2) / (r * r * r)};
          },
          [](const HyperExponential& h) -> ServiceMoments {
            ServiceMoments m;
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              const double inv = 1.0 / h.rates[i];
              m.g1 += h.weights[i] * inv;
              m.g2 += h.weights[i] * 2.0 * inv * inv;
              m.g3 += h.weights[i] * 6.0 * inv * inv * inv;
            }
            return m;
          },
          [](const LogNormal& l) -> ServiceMoments {
            const double a = 1.0 + l.scv;
            return {l.mean, l.mean * l.mean * a, l.mean * l.mean * l.mean * a * a * a};
          },
          [](const AtomMixturePlusExp& m) -> ServiceMoments {
            const double inv = 1.0 / m.exp_rate;
            ServiceMoments r{m.exp_weight * inv, m.exp_weight * 2.0 * inv * inv,
                             m.exp_weight * 6.0 * inv * inv * inv};
            for (const Atom& a : m.atoms) {
              r.g1 += a.weight * a.location;
              r.g2 += a.weight * a.location * a.location;
              r.g3 += a.weight * a.location * a.location * a.location;
            }
            return r;
          },
          [](const RawMoments& r) -> ServiceMoments { return {r.g1, r.g2, r.g3}; }},
      spec);
}

double ServiceStats::skewness() const {
  if (!(scv > 0.0)) {
    throw Error(ErrorCode::DegenerateDistribution, "skewness undefined for zero-variance service");
  }
  return third / std::pow(scv, 1.5);
}

ServiceStats service_stats(const ServiceSpec& spec) {
  const ServiceMoments m = service_moments(spec);
  ServiceStats s;
  s.rate = 1.0 / m.g1;
  if (const auto* l = std::get_if<LogNormal>(&spec)) {
    // Exact: gamma = (c^2 + 3) c.
    s.scv = l->scv;
    s.third = l->scv * l->scv * (l->scv + 3.0);
    return s;
  }
  s.scv = std::max(0.0, m.g2 / (m.g1 * m.g1) - 1.0);
  const double r2 = m.g2 / (m.g1 * m.g1);
  const double r3 = m.g3 / (m.g1 * m.g1 * m.g1);
  s.third = r3 - 3.0 * r2 + 2.0;
  return s;
}

bool has_closed_form_lst(const ServiceSpec& spec) {
  return !std::holds_alternative<LogNormal>(spec) && !std::holds_alternative<RawMoments>(spec);
}

double lst(const ServiceSpec& spec, double s) { return lst_value(spec, s); }

std::complex<double> lst(const ServiceSpec& spec, std::complex<double> s) {
  return lst_value(spec, s);
}

double lst_derivative(const ServiceSpec& spec, double s) { return lst_slope(spec, s); }

double lst_abscissa(const ServiceSpec& spec) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  require_lst(spec);
  return std::visit(overloaded{
                        [](const Exponential& e) { return -e.rate; },
                        [](const Erlang& e) { return -e.rate; },
                        [](const HyperExponential& h) {
                          double lo = -inf;
                          for (std::size_t i = 0; i < h.rates.size(); ++i) {
                            if (h.weights[i] > 0.0) lo = std::max(lo, -h.rates[i]);
                          }
                          return lo;
                        },
                        [](const AtomMixturePlusExp& m) { return m.exp_weight > 0.0 ? -m.exp_rate : -inf; },
                        [](const auto&) { return -inf; }},
                    spec);
}

double Mg1Params::load() const { return arrival_rate * service_moments(service).g1; }

void Mg1Params::validate() const {
  require(positive(arrival_rate), "arrival rate must be positive and finite");
  varcurve::validate(service);
}

void Mg1Params::require_stable() const {
  validate();
  const double rho = load();
  if (!(rho < 1.0)) {
    std::ostringstream os;
    os << "load rho = " << rho << " must be below 1";
    throw Error(ErrorCode::UnstableQueue, os.str());
  }
}

BusyPeriodLst busy_period_lst(const Mg1Params& p, double s, const Tolerances& tol) {
  p.validate();
  require_lst(p.service);
  require(s > 0.0 && std::isfinite(s), "busy period transform needs s > 0");
  const double lambda = p.arrival_rate;
  BusyPeriodLst r;
  double gamma = 0.0;
  double step = 0.0;
  for (r.iterations = 1; r.iterations <= tol.busy_period_max_iterations; ++r.iterations) {
    const double next = lst(p.service, s + lambda * (1.0 - gamma));
    step = next - gamma;
    gamma = next;
    if (std::abs(step) < tol.busy_period_step) {
      r.value = gamma;
      return r;
    }
    if (std::abs(step) < 1e-10) break;
  }
  if (r.iterations <= tol.busy_period_max_iterations) {
    // The map is convex in gamma and the iterate sits left of the minimal
    // root, so Newton climbs to that root without overshooting.
    r.newton = true;
    for (int k = 0; k < 60; ++k) {
      const double x = s + lambda * (1.0 - gamma);
      const double f = lst(p.service, x) - gamma;
      const double df = -lambda * lst_derivative(p.service, x) - 1.0;
      if (df >= 0.0) break;
      step = -f / df;
      gamma += step;
      if (std::abs(step) < tol.busy_period_step) {
        r.value = gamma;
        return r;
      }
    }
  }
  std::ostringstream os;
  os.precision(3);
  os << "busy period transform at s = " << s << " did not settle after " << r.iterations
     << " iterations; last step " << step;
  throw Error(ErrorCode::NonConvergence, os.str());
}

BusyPeriodMoments busy_period_moments(const Mg1Params& p) {
  p.require_stable();
  const ServiceMoments m = service_moments(p.service);
  require_third_moment(m);
  const double rho = p.load();
  const double q = 1.0 - rho;
  return {m.g1 / q, m.g2 / (q * q * q),
          (m.g3 * q + 3.0 * p.arrival_rate * m.g2 * m.g2) / (q * q * q * q * q)};
}

double queue_pgf(const Mg1Params& p, double z) {
  p.require_stable();
  require_lst(p.service);
  require(z >= 0.0 && z <= 1.0, "queue_pgf needs z in [0, 1]");
  const double rho = p.load();
  const double u = 1.0 - z;
  if (u == 0.0) return 1.0;
  const double g = lst(p.service, p.arrival_rate * u);
  const double den = g - z;
  if (std::abs(den) < 1e-14) {
    throw Error(ErrorCode::NumericalFailure, "queue_pgf denominator vanished away from z = 1");
  }
  return (1.0 - rho) * u * g / den;
}

double stationary_queue_variance(const Mg1Params& p) {
  const Shape sh = stable_shape(p);
  const double c4 = sh.c2 * sh.c2;
  const double r = sh.rho;
  const double bracket = (0.25 * c4 - sh.gc3 / 3.0 + 0.5 * sh.c2 - 1.0 / 12.0) * r * r * r +
                         (sh.gc3 / 3.0 - 1.5 * sh.c2 + 5.0 / 6.0) * r * r +
                         (1.5 * sh.c2 - 1.5) * r + 1.0;
  return bracket * load_factor(r);
}

InterceptResult y_intercept_stationary(const Mg1Params& p) {
  const Shape sh = stable_shape(p);
  const double c4 = sh.c2 * sh.c2;
  const double r = sh.rho;
  InterceptResult res;
  res.kind = InterceptKind::Stationary;
  res.coefficient = ((3.0 * c4 - 4.0 * sh.gc3 + 6.0 * sh.c2 - 1.0) * r * r * r +
                     (4.0 * sh.gc3 - 12.0 * sh.c2 + 4.0) * r * r + (6.0 * sh.c2 - 6.0) * r) /
                    6.0;
  res.intercept = res.coefficient * load_factor(r);
  return res;
}

InterceptResult y_intercept_empty(const Mg1Params& p) {
  const Shape sh = stable_shape(p);
  const double c4 = sh.c2 * sh.c2;
  const double r = sh.rho;
  InterceptResult res;
  res.kind = InterceptKind::Empty;
  res.coefficient = ((3.0 * c4 - 4.0 * sh.gc3 + 6.0 * sh.c2 - 1.0) * r * r * r +
                     (4.0 * sh.gc3 - 6.0 * sh.c2 - 2.0) * r * r + (-6.0 * sh.c2 + 6.0) * r) /
                    12.0;
  res.intercept = -(1.0 - res.coefficient) * load_factor(r);
  return res;
}

double y_intercept_arbitrary(const Mg1Params& p, double initial_variance) {
  require(initial_variance >= 0.0 && std::isfinite(initial_variance),
          "initial queue variance must be finite and nonnegative");
  return initial_variance - stationary_queue_variance(p) + y_intercept_stationary(p).intercept;
}

double asymptotic_covariance_aq(const Mg1Params& p) {
  const Shape sh = stable_shape(p);
  const double r = sh.rho;
  return load_factor(r) * (1.0 + (sh.c2 - 1.0) * r * (2.0 - r) / 2.0);
}

namespace {

template <class T>
T b_star_at(const Mg1Params& p, double rho, const T& s, const T& gamma) {
  const T lambda(p.arrival_rate);
  const T g = lst_value(p.service, s);
  const T y = lambda * (1 - gamma);
  const T gy = lst_value(p.service, y);
  const T pi = T(1.0 - rho) * (1 - gamma) * gy / (gy - gamma);
  const T inner = g / (1 - g) * (1 - s * pi / (s + y)) - lambda / s;
  return 2 * lambda / s * inner;
}

Wide50 busy_period_wide(const Mg1Params& p, double s) {
  const Wide50 ws(s);
  const Wide50 lambda(p.arrival_rate);
  Wide50 gamma(busy_period_lst(p, s).value);
  const Wide50 eps("1e-45");
  for (int k = 0; k < 12; ++k) {
    const Wide50 x = ws + lambda * (1 - gamma);
    const Wide50 f = lst_value(p.service, x) - gamma;
    const Wide50 df = -lambda * lst_slope(p.service, x) - 1;
    const Wide50 step = -f / df;
    gamma += step;
    if (abs(step) < eps) break;
  }
  return gamma;
}

}  // namespace

BStar b_star(const Mg1Params& p, double s, const Tolerances& tol) {
  p.require_stable();
  require_lst(p.service);
  require(s > 0.0 && std::isfinite(s), "b*(s) needs s > 0");
  const double gamma = busy_period_lst(p, s, tol).value;
  return {b_star_at<double>(p, p.load(), s, gamma), s < tol.precision_loss_s};
}

double v_star(const Mg1Params& p, double s) { return p.arrival_rate / s + b_star(p, s).value; }

double busy_period_branch_distance(const Mg1Params& p) {
  p.require_stable();
  require_lst(p.service);
  const double lambda = p.arrival_rate;
  auto slope = [&](double x) { return 1.0 + lambda * lst_derivative(p.service, x); };
  const double a = lst_abscissa(p.service);
  double lo;
  if (std::isfinite(a)) {
    lo = a * (1.0 - 1e-12);
  } else {
    lo = -1.0;
    for (int k = 0; k < 200 && slope(lo) > 0.0; ++k) lo *= 2.0;
  }
  double hi = 0.0;
  if (slope(lo) > 0.0) {
    throw Error(ErrorCode::NumericalFailure, "no busy-period branch point found");
  }
  for (int k = 0; k < 200 && hi - lo > 1e-15 * std::abs(lo); ++k) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0.0 ? hi : lo) = mid;
  }
  const double x = 0.5 * (lo + hi);
  return -(x + lambda * (lst(p.service, x) - 1.0));
}

BStarLimit b_star_limit(const Mg1Params& p) {
  const double delta = busy_period_branch_distance(p);
  const double rho = p.load();
  constexpr int points = 6;
  BStarLimit out;
  std::vector<Wide50> xs, ys;
  double s = std::min(0.2, 0.02 * delta);
  for (int k = 0; k < points; ++k, s *= 0.5) {
    const Wide50 gamma = busy_period_wide(p, s);
    const Wide50 b = b_star_at<Wide50>(p, rho, Wide50(s), gamma);
    xs.push_back(Wide50(s));
    ys.push_back(b);
    out.s.push_back(s);
    out.b.push_back(static_cast<double>(b));
  }
  // Neville's scheme evaluated at s = 0.
  for (int m = 1; m < points; ++m) {
    for (int i = 0; i + m < points; ++i) {
      ys[i] = (xs[i + m] * ys[i] - xs[i] * ys[i + 1]) / (xs[i + m] - xs[i]);
    }
  }
  out.value = static_cast<double>(ys[0]);
  return out;
}

AtomMixturePlusExp daley_counterexample() {
  return {192.0 / 384.0,
          1.0,
          {{147.0 / 384.0, 0.5}, {8.0 / 384.0, 1.5}, {30.0 / 384.0, 2.5}, {7.0 / 384.0, 4.5}}};
}

double Mm1Asymptote::evaluate(double t) const {
  return rate * t + root_coefficient * std::sqrt(t) + intercept;
}

Mm1Asymptote mm1_variance_asymptote(double arrival_rate, double service_rate) {
  require(positive(arrival_rate) && positive(service_rate), "rates must be positive");
  const double rho = arrival_rate / service_rate;
  Mm1Asymptote a;
  if (arrival_rate == service_rate) {
    constexpr double pi = std::numbers::pi;
    a.regime = Mm1Regime::Critical;
    a.rate = 2.0 * (1.0 - 2.0 / pi) * arrival_rate;
    a.root_coefficient = -std::sqrt(arrival_rate / pi);
    a.intercept = (pi - 2.0) / (4.0 * pi);
    return a;
  }
  a.regime = rho < 1.0 ? Mm1Regime::Stable : Mm1Regime::Overloaded;
  a.rate = rho < 1.0 ? arrival_rate : service_rate;
  a.intercept = -load_factor(rho);
  return a;
}

RenewalAsymptote renewal_intercepts(double scv, double skewness, RenewalMode mode) {
  require(positive(scv), "renewal intercepts need scv > 0");
  require(std::isfinite(skewness), "skewness must be finite");
  const double c4 = scv * scv;
  const double gc3 = skewness * std::pow(scv, 1.5);
  RenewalAsymptote r;
  r.rate_coefficient = scv;
  if (mode == RenewalMode::Equilibrium) {
    r.intercept = 0.5 * (c4 - 1.0) - (gc3 - 2.0) / 3.0;
  } else {
    r.intercept = 1.25 * (c4 - 1.0) - 2.0 * (gc3 - 2.0) / 3.0;
  }
  return r;
}

}  // namespace varcurve
