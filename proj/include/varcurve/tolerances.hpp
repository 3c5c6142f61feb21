#pragma once

namespace varcurve {

// Numerical tolerances shared by the analytics, the oracles and the
// acceptance suite. Every threshold the tests pin lives here.
struct Tolerances {
  // Generators: |row sum| <= generator_row_sum * max(1, max |Q_ii|).
  double generator_row_sum = 1e-12;
  // solve_linear: pivots below pivot_relative * ||A||_max are singular.
  double pivot_relative = 1e-14;
  double solve_residual = 1e-10;
  double stationary_residual = 1e-10;
  // Poisson tail mass dropped by uniformization.
  double kernel_truncation = 1e-12;
  double drazin_identity = 1e-9;

  // Adaptive Runge-Kutta for the factorial-moment system.
  double ode_absolute = 1e-10;
  double ode_relative = 1e-9;

  // Closed form versus generic MAP agreement.
  double closed_form_relative = 1e-8;
  double closed_form_absolute = 1e-10;
  // CLI cross-check threshold (exit code 3 above it).
  double cross_check = 1e-6;

  // |rho - 1| below which the closed forms use the balanced branch plus a
  // first-order correction from a central difference of half-width unit_rho_step.
  double unit_rho_switch = 1e-8;
  double unit_rho_step = 1e-6;

  double busy_period_step = 1e-13;
  long busy_period_max_iterations = 100000;
  // b*(s) in double precision is flagged below this s.
  double precision_loss_s = 1e-3;
};

inline constexpr Tolerances kTolerances{};

// |a - b| <= relative * max(|a|, |b|) + absolute
inline bool agrees(double a, double b, double relative, double absolute) {
  const double diff = a > b ? a - b : b - a;
  const double aa = a < 0 ? -a : a;
  const double bb = b < 0 ? -b : b;
  return diff <= relative * (aa > bb ? aa : bb) + absolute;
}

}  // namespace varcurve
