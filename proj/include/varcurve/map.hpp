#pragma once

#include <span>

#include "varcurve/matrix.hpp"

namespace varcurve {

/// Markovian arrival process (D0, D1): D0 holds transitions that do not
/// count, D1 the event intensities. D0 + D1 must be an irreducible generator.
class MarkovArrivalProcess {
 public:
  MarkovArrivalProcess(DenseMatrix d0, DenseMatrix d1, const Tolerances& tol = kTolerances);

  /// One-phase MAP, i.e. a Poisson process.
  static MarkovArrivalProcess poisson(double rate);

  std::size_t size() const { return d0_.rows(); }
  const DenseMatrix& d0() const { return d0_; }
  const DenseMatrix& d1() const { return d1_; }
  const GeneratorMatrix& generator() const { return generator_; }

 private:
  DenseMatrix d0_;
  DenseMatrix d1_;
  GeneratorMatrix generator_;
};

/// Probability row vector over phases.
class PhaseDistribution {
 public:
  explicit PhaseDistribution(Vector probabilities);
  static PhaseDistribution point_mass(std::size_t n, std::size_t phase);

  std::size_t size() const { return p_.size(); }
  std::span<const double> values() const { return p_; }
  double operator[](std::size_t i) const { return p_[i]; }

 private:
  Vector p_;
};

/// Stationary vector with the fundamental matrix (1 pi - Q)^{-1}, the
/// deviation (Drazin) matrix and its square. Immutable once built.
struct DeviationBundle {
  Vector stationary;
  DenseMatrix fundamental;
  DenseMatrix drazin;
  DenseMatrix drazin_squared;
};

/// v(t) = rate * t + intercept + o(1); event_rate is the long-run event rate.
struct VarianceAsymptote {
  double rate = 0.0;
  double intercept = 0.0;
  double event_rate = 0.0;
};

/// Coefficients of M1(t) ~ A0 t + A1 and M2(t) ~ B0 t^2 + 2 B1 t + 2 B2.
struct MomentAsymptoteMatrices {
  DenseMatrix a0, a1, b0, b1, b2;
};

DeviationBundle deviation_bundle(const MarkovArrivalProcess& map,
                                 const Tolerances& tol = kTolerances);

double event_rate(const MarkovArrivalProcess& map, const DeviationBundle& bundle);

VarianceAsymptote variance_asymptote_stationary(const MarkovArrivalProcess& map,
                                                const DeviationBundle& bundle);

/// Intercept of the variance curve when the initial phase is drawn from theta.
double y_intercept_arbitrary(const MarkovArrivalProcess& map, const DeviationBundle& bundle,
                             const PhaseDistribution& theta);

/// Phase distribution seen just after an event: pi D1 / (pi D1 1).
PhaseDistribution event_stationary_distribution(const MarkovArrivalProcess& map,
                                                const DeviationBundle& bundle);

/// lim Cov(N(t), w(phi(t))) for initial distribution theta, where w assigns a
/// value to each phase.
double asymptotic_covariance(const MarkovArrivalProcess& map, const DeviationBundle& bundle,
                             const PhaseDistribution& theta, std::span<const double> phase_values);

MomentAsymptoteMatrices moment_asymptote_matrices(const MarkovArrivalProcess& map,
                                                  const DeviationBundle& bundle);

// ---------------------------------------------------------------------------
// Transient oracles. These never touch the deviation matrix; they integrate
// the counting process directly and are what the asymptotes are checked
// against.

enum class MomentMethod { Automatic, RungeKutta, Uniformization };

/// kernel = e^{Qt}; [m1]_ij = E[N(t) 1{phi(t)=j} | phi(0)=i]; m2 likewise with N(N-1).
struct FactorialMoments {
  DenseMatrix kernel;
  DenseMatrix m1;
  DenseMatrix m2;
};

FactorialMoments transient_factorial_moments(const MarkovArrivalProcess& map, double t,
                                             MomentMethod method = MomentMethod::Automatic,
                                             const Tolerances& tol = kTolerances);

double transient_variance(const MarkovArrivalProcess& map, const PhaseDistribution& theta, double t,
                          MomentMethod method = MomentMethod::Automatic,
                          const Tolerances& tol = kTolerances);

/// Finite-t Cov(N(t), w(phi(t))) from the transient moments.
double transient_covariance(const MarkovArrivalProcess& map, const PhaseDistribution& theta,
                            std::span<const double> phase_values, double t,
                            MomentMethod method = MomentMethod::Automatic,
                            const Tolerances& tol = kTolerances);

/// int_0^t (e^{Qu} - 1 pi) du, integrated term by term over the uniformized
/// kernel. Needs pi only for the subtracted linear term.
DenseMatrix transient_deviation(const GeneratorMatrix& q, std::span<const double> stationary,
                                double t, const Tolerances& tol = kTolerances);

/// Decay rate of ||e^{Qt} - 1 pi|| fitted over doubling horizons. A proxy for
/// the spectral gap used to choose oracle horizons.
double spectral_gap_estimate(const GeneratorMatrix& q, std::span<const double> stationary);

}  // namespace varcurve
