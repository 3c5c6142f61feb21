#include <cmath>
#include <limits>

#include "doctest.h"
#include "varcurve/errors.hpp"
#include "varcurve/io.hpp"
#include "varcurve/mm1k.hpp"
#include "varcurve/simulator.hpp"

using namespace varcurve;

namespace {

SimConfig small_mm1k(InitialCondition init) {
  SimConfig c;
  c.model = Mm1kParams{0.9, 1.0, 4};
  c.initial = std::move(init);
  c.grid = arithmetic_grid(0.5, 20.0, 0.5);
  c.replications = 400;
  c.master_seed = 99;
  return c;
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("serial and parallel runs are identical for any thread count") {
    for (const SimConfig& base : {small_mm1k(EmptyStart{}), small_mm1k(PmfStart{{0.1, 0.2, 0.3, 0.2, 0.2}})}) {
      const CountMatrix ref = simulate_counts_serial(base);
      for (int threads : {1, 2, 3, 7}) {
        SimConfig c = base;
        c.threads = threads;
        CHECK(simulate_counts(c).values == ref.values);
      }
    }
    SimConfig g;
    g.model = Mg1Params{0.7, HyperExponential::balanced(1.0, 3.0)};
    g.initial = WarmupStart{200.0};
    g.grid = arithmetic_grid(1.0, 30.0, 1.0);
    g.replications = 150;
    const CountMatrix ref = simulate_counts_serial(g);
    g.threads = 3;
    CHECK(simulate_counts(g).values == ref.values);
  }

  TEST_CASE("different seeds give different paths") {
    SimConfig a = small_mm1k(EmptyStart{});
    SimConfig b = a;
    b.master_seed = 100;
    CHECK(simulate_counts(a).values != simulate_counts(b).values);
  }

  TEST_CASE("departures balance admissions and queue") {
    for (const SimConfig& c : {small_mm1k(FixedStart{3}), small_mm1k(EventStationaryStart{})}) {
      for (std::uint32_t r = 0; r < 20; ++r) {
        const ReplicationTrace tr = simulate_replication(c, r);
        const CountMatrix all = simulate_counts_serial(c);
        for (std::size_t i = 0; i < c.grid.size(); ++i) {
          CHECK(tr.departures[i] + tr.queue[i] == tr.admitted[i] + tr.initial_queue);
          CHECK(tr.queue[i] <= 4u);
          CHECK(tr.departures[i] == all(r, i));
          if (i > 0) CHECK(tr.departures[i] >= tr.departures[i - 1]);
        }
      }
    }
    SimConfig g;
    g.model = Mg1Params{0.8, Erlang{2, 2.0}};
    g.initial = EmptyStart{};
    g.grid = arithmetic_grid(1.0, 50.0, 1.0);
    g.replications = 5;
    for (std::uint32_t r = 0; r < 5; ++r) {
      const ReplicationTrace tr = simulate_replication(g, r);
      CHECK(tr.initial_queue == 0u);
      for (std::size_t i = 0; i < g.grid.size(); ++i) {
        CHECK(tr.departures[i] + tr.queue[i] == tr.admitted[i]);
      }
    }
  }

  TEST_CASE("stationary start reproduces the departure rate") {
    const Mm1kParams p{0.9, 1.0, 4};
    SimConfig c = small_mm1k(stationary_start(p));
    c.replications = 4000;
    const auto est = estimate_variance_curve(simulate_counts(c), c.grid);
    const double rate = departure_rate(p);
    for (std::size_t i = 0; i < c.grid.size(); i += 8) {
      const double se = std::sqrt(est.variance[i] / c.replications);
      CHECK(std::abs(est.mean[i] - rate * c.grid[i]) < 4.5 * se);
    }
  }

  TEST_CASE("M/M/1 output is Poisson in equilibrium") {
    SimConfig g;
    g.model = Mg1Params{0.5, Exponential{1.0}};
    g.initial = WarmupStart{500.0};
    g.grid = {5.0, 20.0, 40.0};
    g.replications = 6000;
    const auto est = estimate_variance_curve(simulate_counts(g), g.grid);
    for (std::size_t i = 0; i < g.grid.size(); ++i) {
      const double v = 0.5 * g.grid[i];
      CHECK(std::abs(est.variance[i] - v) < 1.5 * est.half_width[i] + 1e-9);
    }
  }

  TEST_CASE("variance estimator on a hand matrix") {
    CountMatrix m;
    m.replications = 4;
    m.points = 2;
    m.values = {1, 10, 2, 10, 3, 10, 6, 10};
    const std::vector<double> grid{1.0, 2.0};
    const auto est = estimate_variance_curve(m, grid, 2);
    CHECK(est.mean[0] == doctest::Approx(3.0));
    CHECK(est.variance[0] == doctest::Approx(14.0 / 3.0));
    CHECK(est.variance[1] == 0.0);
    CHECK(est.half_width[1] == 0.0);
    const double m4 = (16.0 + 1.0 + 0.0 + 81.0) / 4.0;
    const double s2 = 14.0 / 3.0;
    CHECK(est.half_width[0] == doctest::Approx(1.959963984540054 * std::sqrt((m4 - s2 * s2 * 1.0 / 3.0) / 4.0)));
    CHECK(est.groups == 2u);
    CHECK(est.group_sum[0] == 3.0);
    CHECK(est.group_sum[2] == 9.0);
  }

  TEST_CASE("tail fit recovers an exact line") {
    VarianceCurveEstimate est;
    for (int i = 1; i <= 40; ++i) {
      est.t.push_back(i);
      est.variance.push_back(0.75 * i - 2.0);
      est.mean.push_back(0.0);
      est.half_width.push_back(0.1 + 0.01 * i);
    }
    const auto fit = fit_linear_tail(est, 0.5);
    CHECK(fit.slope == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(fit.points == 20u);
    CHECK(fit.t_low == 21.0);
    try {
      (void)fit_linear_tail(est, 0.1);
      FAIL("expected InsufficientPoints");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientPoints);
    }
  }

  TEST_CASE("configuration checks") {
    SimConfig c = small_mm1k(FixedStart{9});
    CHECK_THROWS_AS(validate(c), Error);
    c = small_mm1k(EmptyStart{});
    c.grid = {1.0, 1.0};
    CHECK_THROWS_AS(validate(c), Error);
    c = small_mm1k(EmptyStart{});
    c.replications = 1;
    CHECK_THROWS_AS(validate(c), Error);
    SimConfig g;
    g.model = Mg1Params{0.5, RawMoments{1.0, 2.0, 6.0}};
    g.grid = {1.0};
    try {
      (void)simulate_counts(g);
      FAIL("expected UnsamplableSpec");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnsamplableSpec);
    }
  }
}
