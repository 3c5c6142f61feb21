#include "varcurve/map.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "varcurve/errors.hpp"

namespace varcurve {

namespace {

GeneratorMatrix combined_generator(const DenseMatrix& d0, const DenseMatrix& d1,
                                   const Tolerances& tol) {
  if (!d0.square() || d0.rows() != d1.rows() || d0.cols() != d1.cols()) {
    throw Error(ErrorCode::InvalidArgument, "D0 and D1 must be square and of equal size");
  }
  return GeneratorMatrix(d0 + d1, tol);
}

// Uniformization rate slightly above the largest exit rate keeps the
// embedded chain aperiodic, so steady-state detection can trigger.
double uniformization_rate(const DenseMatrix& d0) {
  double q = 0.0;
  for (std::size_t i = 0; i < d0.rows(); ++i) q = std::max(q, -d0(i, i));
  return 1.05 * q;
}

// Terms shared by every asymptotic formula.
struct Pieces {
  Vector unit;               // 1
  Vector event_column;       // D1 1
  Vector event_row;          // pi D1
  double rate = 0.0;         // pi D1 1
  Vector drazin_events;      // Drazin D1 1
  Vector drazin_sq_events;   // Drazin^2 D1 1
  Vector events_drazin;      // pi D1 Drazin
};

Pieces pieces(const MarkovArrivalProcess& map, const DeviationBundle& b) {
  Pieces p;
  p.unit = ones(map.size());
  p.event_column = right_multiply(map.d1(), p.unit);
  p.event_row = left_multiply(b.stationary, map.d1());
  p.rate = dot(p.event_row, p.unit);
  p.drazin_events = right_multiply(b.drazin, p.event_column);
  p.drazin_sq_events = right_multiply(b.drazin_squared, p.event_column);
  p.events_drazin = left_multiply(p.event_row, b.drazin);
  return p;
}

void check_theta(const PhaseDistribution& theta, std::size_t n) {
  if (theta.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "initial distribution has " +
                                                std::to_string(theta.size()) + " phases, MAP has " +
                                                std::to_string(n));
  }
}

// Flat storage of (P, M1, M2) for the ODE integrator.
struct MomentState {
  std::size_t n = 0;
  std::vector<double> y;  // 3 n^2

  explicit MomentState(std::size_t dim) : n(dim), y(3 * dim * dim, 0.0) {}
  double* p() { return y.data(); }
  double* m1() { return y.data() + n * n; }
  double* m2() { return y.data() + 2 * n * n; }
  const double* p() const { return y.data(); }
  const double* m1() const { return y.data() + n * n; }
  const double* m2() const { return y.data() + 2 * n * n; }
};

// out (+)= scale * a * b for n x n row-major blocks.
void multiply_into(const double* a, const DenseMatrix& b, double* out, double scale, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double* oi = out + i * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = scale * a[i * n + k];
      if (aik == 0.0) continue;
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < n; ++j) oi[j] += aik * bk[j];
    }
  }
}

// d/dt (P, M1, M2) = (P Q, M1 Q + P D1, M2 Q + 2 M1 D1)
void moment_rhs(const MarkovArrivalProcess& map, const std::vector<double>& y,
                std::vector<double>& dy) {
  const std::size_t n = map.size();
  const std::size_t block = n * n;
  std::fill(dy.begin(), dy.end(), 0.0);
  const DenseMatrix& q = map.generator().matrix();
  const DenseMatrix& d1 = map.d1();
  multiply_into(y.data(), q, dy.data(), 1.0, n);
  multiply_into(y.data() + block, q, dy.data() + block, 1.0, n);
  multiply_into(y.data(), d1, dy.data() + block, 1.0, n);
  multiply_into(y.data() + 2 * block, q, dy.data() + 2 * block, 1.0, n);
  multiply_into(y.data() + block, d1, dy.data() + 2 * block, 2.0, n);
}

DenseMatrix block_matrix(const double* data, std::size_t n) {
  return DenseMatrix(n, n, std::vector<double>(data, data + n * n));
}

// Dormand-Prince 5(4) with first-same-as-last and max-norm error control.
FactorialMoments moments_runge_kutta(const MarkovArrivalProcess& map, double t,
                                     const Tolerances& tol) {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr std::array<double, 7> e{71.0 / 57600,  0.0,         -71.0 / 16695, 71.0 / 1920,
                                           -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
  (void)c;

  const std::size_t n = map.size();
  MomentState state(n);
  for (std::size_t i = 0; i < n; ++i) state.p()[i * n + i] = 1.0;
  const std::size_t dim = state.y.size();

  std::array<std::vector<double>, 7> k;
  for (auto& ki : k) ki.assign(dim, 0.0);
  std::vector<double> trial(dim), next(dim);
  moment_rhs(map, state.y, k[0]);

  const double rate = std::max(uniformization_rate(map.d0()), 1e-300);
  double h = std::min(t, 0.1 / rate);
  double now = 0.0;
  long steps = 0;
  while (now < t) {
    if (now + h > t) h = t - now;
    if (h < 1e-14 * std::max(1.0, t)) {
      throw Error(ErrorCode::StepSizeUnderflow, "step size " + std::to_string(h) + " at t = " +
                                                    std::to_string(now));
    }
    if (++steps > 50'000'000) throw Error(ErrorCode::StepSizeUnderflow, "step budget exhausted");
    for (int s = 1; s < 7; ++s) {
      for (std::size_t i = 0; i < dim; ++i) {
        double acc = 0.0;
        for (int r = 0; r < s; ++r) acc += a[s][r] * k[r][i];
        (s == 6 ? next : trial)[i] = state.y[i] + h * acc;
      }
      moment_rhs(map, s == 6 ? next : trial, k[s]);
    }
    double err = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      double ei = 0.0;
      for (int r = 0; r < 7; ++r) ei += e[r] * k[r][i];
      const double scale = tol.ode_absolute +
                           tol.ode_relative * std::max(std::abs(state.y[i]), std::abs(next[i]));
      err = std::max(err, std::abs(h * ei) / scale);
    }
    if (err <= 1.0) {
      now += h;
      state.y.swap(next);
      k[0].swap(k[6]);
    }
    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
  }
  return {block_matrix(state.p(), n), block_matrix(state.m1(), n), block_matrix(state.m2(), n)};
}

FactorialMoments moments_uniformization(const MarkovArrivalProcess& map, double t,
                                        const Tolerances& tol) {
  const std::size_t n = map.size();
  const double rate = uniformization_rate(map.d0());
  if (rate * t > 1e8) throw Error(ErrorCode::NumericalFailure, "uniformization horizon too long");
  const DenseMatrix silent = DenseMatrix::identity(n) + map.d0() * (1.0 / rate);
  const DenseMatrix counted = map.d1() * (1.0 / rate);
  const DenseMatrix step = silent + counted;
  // Tighter tail than the kernel: the moment matrices grow like (rate t)^2.
  const PoissonWeights w = poisson_weights(rate * t, tol.kernel_truncation * 1e-4);

  DenseMatrix v = DenseMatrix::identity(n);
  DenseMatrix u(n, n), z(n, n);
  FactorialMoments out{DenseMatrix(n, n), DenseMatrix(n, n), DenseMatrix(n, n)};
  for (std::size_t k = 0; k <= w.last(); ++k) {
    if (k >= w.first) {
      const double wk = w.weights[k - w.first];
      out.kernel += v * wk;
      out.m1 += u * wk;
      out.m2 += z * wk;
    }
    DenseMatrix z_next = z * step + (u * counted) * 2.0;
    DenseMatrix u_next = u * step + v * counted;
    v = v * step;
    u = std::move(u_next);
    z = std::move(z_next);
  }
  return out;
}

}  // namespace

MarkovArrivalProcess::MarkovArrivalProcess(DenseMatrix d0, DenseMatrix d1, const Tolerances& tol)
    : d0_(std::move(d0)), d1_(std::move(d1)), generator_(combined_generator(d0_, d1_, tol)) {
  const std::size_t n = d0_.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(d0_(i, i) < 0.0)) throw Error(ErrorCode::InvalidArgument, "D0 diagonal must be negative");
    for (std::size_t j = 0; j < n; ++j) {
      if (d1_(i, j) < 0.0) throw Error(ErrorCode::InvalidArgument, "D1 must be nonnegative");
      if (i != j && d0_(i, j) < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "D0 off-diagonal entries must be nonnegative");
      }
    }
  }
  // Throws SingularMatrix when D0 is singular.
  (void)LuDecomposition(d0_, tol);
}

MarkovArrivalProcess MarkovArrivalProcess::poisson(double rate) {
  if (!(rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "Poisson rate must be positive");
  return MarkovArrivalProcess(DenseMatrix(1, 1, {-rate}), DenseMatrix(1, 1, {rate}));
}

PhaseDistribution::PhaseDistribution(Vector probabilities) : p_(std::move(probabilities)) {
  if (p_.empty()) throw Error(ErrorCode::InvalidArgument, "empty phase distribution");
  double total = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument, "phase probabilities must be finite and >= 0");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "phase probabilities sum to " + std::to_string(total));
  }
}

PhaseDistribution PhaseDistribution::point_mass(std::size_t n, std::size_t phase) {
  if (phase >= n) throw Error(ErrorCode::InvalidArgument, "phase index out of range");
  Vector p(n, 0.0);
  p[phase] = 1.0;
  return PhaseDistribution(std::move(p));
}

DeviationBundle deviation_bundle(const MarkovArrivalProcess& map, const Tolerances& tol) {
  const std::size_t n = map.size();
  DeviationBundle b;
  b.stationary = stationary_distribution(map.generator(), tol);
  const DenseMatrix projector = DenseMatrix::outer(ones(n), b.stationary);
  b.fundamental = solve_linear(projector - map.generator().matrix(), DenseMatrix::identity(n), tol);
  b.drazin = b.fundamental - projector;
  b.drazin_squared = b.drazin * b.drazin;
  return b;
}

double event_rate(const MarkovArrivalProcess& map, const DeviationBundle& bundle) {
  return dot(left_multiply(bundle.stationary, map.d1()), ones(map.size()));
}

VarianceAsymptote variance_asymptote_stationary(const MarkovArrivalProcess& map,
                                                const DeviationBundle& bundle) {
  const Pieces p = pieces(map, bundle);
  VarianceAsymptote out;
  out.event_rate = p.rate;
  out.rate = p.rate + 2.0 * dot(p.event_row, p.drazin_events);
  out.intercept = -2.0 * dot(p.event_row, p.drazin_sq_events);
  return out;
}

double y_intercept_arbitrary(const MarkovArrivalProcess& map, const DeviationBundle& bundle,
                             const PhaseDistribution& theta) {
  check_theta(theta, map.size());
  const Pieces p = pieces(map, bundle);
  const double stationary_intercept = -2.0 * dot(p.event_row, p.drazin_sq_events);
  // theta Drazin D1 Drazin D1 1
  const Vector theta_drazin = left_multiply(theta.values(), bundle.drazin);
  const double cross = dot(left_multiply(theta_drazin, map.d1()), p.drazin_events);
  const double first = dot(theta_drazin, p.event_column);
  const double correction = 2.0 * p.rate * dot(theta.values(), p.drazin_sq_events) - 2.0 * cross +
                            first * first;
  // theta M1(t) 1 contributes its constant term theta Drazin D1 1 as well.
  return stationary_intercept - correction + first;
}

PhaseDistribution event_stationary_distribution(const MarkovArrivalProcess& map,
                                                const DeviationBundle& bundle) {
  Vector alpha = left_multiply(bundle.stationary, map.d1());
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  for (double& a : alpha) a /= total;
  // Renormalize away rounding so the distribution invariant holds exactly.
  const double again = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  for (double& a : alpha) a /= again;
  return PhaseDistribution(std::move(alpha));
}

double asymptotic_covariance(const MarkovArrivalProcess& map, const DeviationBundle& bundle,
                             const PhaseDistribution& theta, std::span<const double> phase_values) {
  check_theta(theta, map.size());
  if (phase_values.size() != map.size()) {
    throw Error(ErrorCode::InvalidArgument, "phase value vector has the wrong length");
  }
  const Pieces p = pieces(map, bundle);
  const double level_phase = dot(phase_values, p.events_drazin);
  const double mean_value = dot(bundle.stationary, phase_values);
  return level_phase - mean_value * dot(theta.values(), p.drazin_events);
}

MomentAsymptoteMatrices moment_asymptote_matrices(const MarkovArrivalProcess& map,
                                                  const DeviationBundle& bundle) {
  const Pieces p = pieces(map, bundle);
  const auto& pi = bundle.stationary;
  const DenseMatrix one_pi = DenseMatrix::outer(p.unit, pi);
  const DenseMatrix du_pi = DenseMatrix::outer(p.drazin_events, pi);        // Drazin D1 1 pi
  const DenseMatrix one_rd = DenseMatrix::outer(p.unit, p.events_drazin);   // 1 pi D1 Drazin
  const double rdu = dot(p.event_row, p.drazin_events);                      // pi D1 Drazin D1 1
  const double rddu = dot(p.event_row, p.drazin_sq_events);                  // pi D1 Drazin^2 D1 1
  const Vector events_drazin_sq = left_multiply(p.event_row, bundle.drazin_squared);
  const Vector rdd1d = left_multiply(left_multiply(p.events_drazin, map.d1()), bundle.drazin);
  const Vector dd1du = right_multiply(bundle.drazin, right_multiply(map.d1(), p.drazin_events));

  MomentAsymptoteMatrices m;
  m.a0 = one_pi * p.rate;
  m.a1 = du_pi + one_rd;
  m.b0 = one_pi * (p.rate * p.rate);
  m.b1 = du_pi * p.rate + one_rd * p.rate + one_pi * rdu;
  m.b2 = one_pi * (-rddu) + DenseMatrix::outer(p.drazin_events, p.events_drazin) -
         DenseMatrix::outer(p.drazin_sq_events, pi) * p.rate -
         DenseMatrix::outer(p.unit, events_drazin_sq) * p.rate +
         DenseMatrix::outer(p.unit, rdd1d) + DenseMatrix::outer(dd1du, pi);
  return m;
}

FactorialMoments transient_factorial_moments(const MarkovArrivalProcess& map, double t,
                                             MomentMethod method, const Tolerances& tol) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "time must be >= 0");
  const std::size_t n = map.size();
  if (t == 0.0) return {DenseMatrix::identity(n), DenseMatrix(n, n), DenseMatrix(n, n)};
  if (method == MomentMethod::Automatic) {
    // Explicit steps are bounded by the fastest rate; long or wide problems
    // go to the series instead.
    const double work = uniformization_rate(map.d0()) * t;
    method = (work <= 2.0e4 && n <= 64) ? MomentMethod::RungeKutta : MomentMethod::Uniformization;
  }
  return method == MomentMethod::RungeKutta ? moments_runge_kutta(map, t, tol)
                                            : moments_uniformization(map, t, tol);
}

double transient_variance(const MarkovArrivalProcess& map, const PhaseDistribution& theta, double t,
                          MomentMethod method, const Tolerances& tol) {
  check_theta(theta, map.size());
  const FactorialMoments m = transient_factorial_moments(map, t, method, tol);
  const Vector unit = ones(map.size());
  const double first = dot(left_multiply(theta.values(), m.m1), unit);
  const double second = dot(left_multiply(theta.values(), m.m2), unit);
  return second + first - first * first;
}

double transient_covariance(const MarkovArrivalProcess& map, const PhaseDistribution& theta,
                            std::span<const double> phase_values, double t, MomentMethod method,
                            const Tolerances& tol) {
  check_theta(theta, map.size());
  if (phase_values.size() != map.size()) {
    throw Error(ErrorCode::InvalidArgument, "phase value vector has the wrong length");
  }
  const FactorialMoments m = transient_factorial_moments(map, t, method, tol);
  const Vector level_by_phase = left_multiply(theta.values(), m.m1);
  const Vector phase_law = left_multiply(theta.values(), m.kernel);
  const double mean_level = std::accumulate(level_by_phase.begin(), level_by_phase.end(), 0.0);
  return dot(level_by_phase, phase_values) - mean_level * dot(phase_law, phase_values);
}

DenseMatrix transient_deviation(const GeneratorMatrix& q, std::span<const double> stationary,
                                double t, const Tolerances& tol) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "time must be >= 0");
  const std::size_t n = q.size();
  if (stationary.size() != n) throw Error(ErrorCode::InvalidArgument, "stationary vector length");
  DenseMatrix result(n, n);
  if (t == 0.0 || n == 1) return result;
  const double rate = 1.05 * q.max_exit_rate();
  const DenseMatrix step = DenseMatrix::identity(n) + q.matrix() * (1.0 / rate);
  const PoissonWeights w = poisson_weights(rate * t, tol.kernel_truncation * 1e-4);

  // int_0^t e^{Qu} du = (1/rate) sum_k step^k P(N > k), N ~ Poisson(rate t).
  // tail[k - first] = P(N > k) on the retained window.
  std::vector<double> tail(w.weights.size());
  double cumulative = 0.0;
  for (std::size_t i = 0; i < w.weights.size(); ++i) {
    cumulative += w.weights[i];
    tail[i] = std::max(0.0, 1.0 - cumulative);
  }
  auto tail_at = [&](std::size_t k) { return k < w.first ? 1.0 : tail[k - w.first]; };
  // E[(N - k)^+] = sum_{m >= k} P(N > m)
  auto excess_from = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.weights.size(); ++i) {
      const std::size_t m = w.first + i;
      if (m > k) s += static_cast<double>(m - k) * w.weights[i];
    }
    return s;
  };

  DenseMatrix power = DenseMatrix::identity(n);
  for (std::size_t k = 0; k <= w.last(); ++k) {
    DenseMatrix next = power * step;
    if (max_abs_diff(next, power) < 1e-16) {
      result += power * excess_from(k);
      break;
    }
    result += power * tail_at(k);
    power = std::move(next);
  }
  result *= 1.0 / rate;
  result -= DenseMatrix::outer(ones(n), stationary) * t;
  return result;
}

double spectral_gap_estimate(const GeneratorMatrix& q, std::span<const double> stationary) {
  const std::size_t n = q.size();
  if (n == 1) return q.max_exit_rate() > 0.0 ? q.max_exit_rate() : 1.0;
  const DenseMatrix projector = DenseMatrix::outer(ones(n), stationary);
  double horizon = 1.0 / q.max_exit_rate();
  DenseMatrix kernel = transition_kernel(q, horizon);
  double distance = max_abs_diff(kernel, projector);
  if (distance < 1e-9) return -std::log(std::max(distance, 1e-300)) / horizon;
  double previous = -1.0;
  for (int k = 0; k < 80; ++k) {
    DenseMatrix doubled = kernel * kernel;
    const double next_distance = max_abs_diff(doubled, projector);
    if (next_distance < 1e-11) {
      // Too close to the rounding floor to fit; keep the last reliable slope.
      if (previous > 0.0) return previous;
      return -std::log(next_distance / distance) / horizon;
    }
    const double estimate = -std::log(next_distance / distance) / horizon;
    if (previous > 0.0 && std::abs(estimate - previous) <= 0.01 * previous) return estimate;
    previous = estimate;
    kernel = std::move(doubled);
    distance = next_distance;
    horizon *= 2.0;
  }
  throw Error(ErrorCode::NonConvergence, "spectral gap estimate did not settle");
}

}  // namespace varcurve
