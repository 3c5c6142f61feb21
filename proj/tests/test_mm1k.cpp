#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "varcurve/errors.hpp"
#include "varcurve/mm1k.hpp"
#include "varcurve/tolerances.hpp"

using namespace varcurve;

namespace {

double unit_load_intercept(double K) {
  return (7 * K * K * K * K + 28 * K * K * K + 37 * K * K + 18 * K) / (180 * (K + 1) * (K + 1));
}

}  // namespace

TEST_SUITE("mm1k") {
  TEST_CASE("stationary vector") {
    for (double rho : {0.3, 1.0, 2.5}) {
      const Mm1kParams p{rho, 1.0, 15};
      const Vector pi = stationary_vector(p);
      const auto ref = oracle::mm1k_stationary(rho, 1.0, 15);
      for (int i = 0; i <= 15; ++i) CHECK(pi[i] == doctest::Approx(ref[i]).epsilon(1e-13));
    }
  }

  TEST_CASE("hitting times against first-step analysis") {
    for (double rho : {0.4, 1.0, 1.7}) {
      const Mm1kParams p{rho, 2.0, 9};
      const auto q = oracle::mm1k_generator(rho, 2.0, 9);
      // The elimination oracle loses a few digits when times reach ~rho^-K.
      for (int to : {0, 4, 9}) {
        const auto ref = oracle::hitting_times(q, to);
        for (int from = 0; from <= 9; ++from) {
          CHECK(hitting_time(p, from, to) == doctest::Approx(ref[from]).epsilon(1e-8));
        }
        double stat = 0.0;
        const auto pi = oracle::mm1k_stationary(rho, 2.0, 9);
        for (int i = 0; i <= 9; ++i) stat += pi[i] * ref[i];
        CHECK(hitting_time_stationary(p, to) == doctest::Approx(stat).epsilon(1e-8));
      }
    }
  }

  TEST_CASE("corner of the deviation matrix from hitting times") {
    const Mm1kParams p{0.8, 1.0, 7};
    const auto q = oracle::mm1k_generator(0.8, 1.0, 7);
    const auto pi = oracle::mm1k_stationary(0.8, 1.0, 7);
    const auto m0 = oracle::hitting_times(q, 0);
    double me0 = 0.0;
    for (int i = 0; i <= 7; ++i) me0 += pi[i] * m0[i];
    CHECK(drazin_corners(p).deviation == doctest::Approx(pi[0] * (me0 - m0[7])).epsilon(1e-11));
  }

  TEST_CASE("unit load closed forms") {
    for (int K : {1, 2, 3, 10, 77, 400}) {
      const auto a = asymptote_closed_form(Mm1kParams{1.0, 1.0, K});
      CHECK(a.intercept == doctest::Approx(unit_load_intercept(K)).epsilon(1e-14));
      CHECK(covariance_closed_form(Mm1kParams{1.0, 1.0, K}) == doctest::Approx(-K * (K + 2) / 24.0).epsilon(1e-14));
      CHECK(mean_queue_length(Mm1kParams{1.0, 1.0, K}) == doctest::Approx(K / 2.0).epsilon(1e-15));
    }
    const auto a1 = asymptote_closed_form(Mm1kParams{1.0, 1.0, 1});
    CHECK(a1.rate == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(a1.intercept == doctest::Approx(0.125).epsilon(1e-15));
  }

  TEST_CASE("large capacity scaling") {
    const auto a = asymptote_closed_form(Mm1kParams{1.0, 1.0, 400});
    CHECK(std::abs(a.rate / 1.0 - 2.0 / 3.0) < 1e-2);
    CHECK(std::abs(a.intercept / (400.0 * 400.0) / (7.0 / 180.0) - 1.0) < 0.2);
  }

  TEST_CASE("closed forms against the generic MAP on random instances") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> load(0.2, 3.0), rate(0.3, 4.0);
    std::uniform_int_distribution<int> cap(1, 60);
    const auto& tol = kTolerances;
    for (int trial = 0; trial < 40; ++trial) {
      const double mu = rate(rng);
      const Mm1kParams p{load(rng) * mu, mu, cap(rng)};
      const auto m = build_map(p);
      const auto b = deviation_bundle(m);
      const auto g = variance_asymptote_stationary(m, b);
      const auto c = asymptote_closed_form(p);
      CHECK(agrees(c.rate, g.rate, tol.closed_form_relative, tol.closed_form_absolute));
      CHECK(agrees(c.intercept, g.intercept, tol.closed_form_relative, tol.closed_form_absolute));
      CHECK(agrees(c.event_rate, g.event_rate, tol.closed_form_relative, tol.closed_form_absolute));
      CHECK(agrees(departure_rate(p), g.event_rate, tol.closed_form_relative, tol.closed_form_absolute));
      const auto corners = drazin_corners(p);
      const std::size_t K = static_cast<std::size_t>(p.capacity);
      CHECK(agrees(corners.deviation, b.drazin(K, 0), tol.closed_form_relative, tol.closed_form_absolute));
      CHECK(agrees(corners.deviation_squared, b.drazin_squared(K, 0), tol.closed_form_relative,
                   tol.closed_form_absolute));
      CHECK(agrees(covariance_closed_form(p),
                   asymptotic_covariance(m, b, PhaseDistribution(b.stationary), state_labels(p)),
                   tol.closed_form_relative, tol.closed_form_absolute));
    }
  }

  TEST_CASE("closed forms are continuous across unit load") {
    for (int K : {1, 5, 40}) {
      const auto at = asymptote_closed_form(Mm1kParams{1.0, 1.0, K});
      for (double eps : {1e-12, 1e-9, 1e-7, 1e-5}) {
        for (double sign : {-1.0, 1.0}) {
          const auto near = asymptote_closed_form(Mm1kParams{1.0 + sign * eps, 1.0, K});
          CHECK(near.intercept == doctest::Approx(at.intercept).epsilon(1e-4 * K + 10 * eps * K * K));
          CHECK(near.rate == doctest::Approx(at.rate).epsilon(1e-4));
          const double cov = covariance_closed_form(Mm1kParams{1.0 + sign * eps, 1.0, K});
          CHECK(cov == doctest::Approx(-K * (K + 2) / 24.0).epsilon(1e-3));
        }
      }
    }
  }

  TEST_CASE("validation") {
    CHECK_THROWS_AS(Mm1kParams({0.0, 1.0, 3}).validate(), Error);
    CHECK_THROWS_AS(Mm1kParams({1.0, -1.0, 3}).validate(), Error);
    CHECK_THROWS_AS(Mm1kParams({1.0, 1.0, 0}).validate(), Error);
    CHECK_THROWS_AS(hitting_time(Mm1kParams{1.0, 1.0, 3}, 0, 4), Error);
  }
}
