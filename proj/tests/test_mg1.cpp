#include <cmath>
#include <complex>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "varcurve/errors.hpp"
#include "varcurve/io.hpp"
#include "varcurve/mg1.hpp"
#include "varcurve/mm1k.hpp"

using namespace varcurve;
using cd = std::complex<double>;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

// Test-side LSTs for the families with simple transforms.
cd erlang_lst(int k, double rate, cd s) { return std::pow(rate / (rate + s), k); }

cd hyper_lst(const HyperExponential& h, cd s) {
  cd v = 0.0;
  for (std::size_t i = 0; i < h.weights.size(); ++i) v += h.weights[i] * h.rates[i] / (h.rates[i] + s);
  return v;
}

double queue_variance_oracle(const std::function<cd(cd)>& g, double lambda, double rho) {
  const double root = oracle::pgf_root([&](double x) { return g(cd(x)).real(); }, lambda, 1.0 + 50.0 / lambda);
  return oracle::mg1_queue_variance(g, lambda, rho, root);
}

}  // namespace

TEST_SUITE("mg1") {
  TEST_CASE("service moments") {
    auto m = service_moments(Deterministic{2.0});
    CHECK(m.g1 == 2.0);
    CHECK(m.g2 == 4.0);
    CHECK(m.g3 == 8.0);
    m = service_moments(Erlang{2, 2.0});
    CHECK(m.g1 == doctest::Approx(1.0));
    CHECK(m.g2 == doctest::Approx(1.5));
    CHECK(m.g3 == doctest::Approx(3.0));
    const auto d = service_moments(daley_counterexample());
    CHECK(d.g1 == 1.0);
    CHECK(d.g2 == 2.0);
    CHECK(d.g3 == 6.0);
    const auto ln = service_stats(LogNormal{2.0, 1.0});
    CHECK(ln.scv == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(ln.skewness() == doctest::Approx(5.0 * std::sqrt(2.0)).epsilon(1e-13));
    const auto h = HyperExponential::balanced(1.0, 4.0);
    CHECK(service_stats(h).scv == doctest::Approx(4.0).epsilon(1e-13));
    const auto r = service_moments(RawMoments::from_shape(2.0, 0.5, 1.0));
    const auto rs = service_stats(RawMoments{r.g1, r.g2, r.g3});
    CHECK(rs.scv == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(rs.skewness() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("deterministic service has no skewness but a finite third term") {
    const auto st = service_stats(Deterministic{1.0});
    CHECK(st.scv == 0.0);
    CHECK(st.third == 0.0);
    CHECK(code_of([&] { (void)st.skewness(); }) == ErrorCode::DegenerateDistribution);
    CHECK(std::isfinite(y_intercept_stationary(Mg1Params{0.5, Deterministic{1.0}}).intercept));
  }

  TEST_CASE("exponential service gives zero coefficients") {
    for (double rho : {0.2, 0.5, 0.9}) {
      const Mg1Params p{rho, Exponential{1.0}};
      CHECK(std::abs(y_intercept_stationary(p).intercept) < 1e-12);
      CHECK(std::abs(y_intercept_stationary(p).coefficient) < 1e-12);
      CHECK(std::abs(y_intercept_empty(p).coefficient) < 1e-12);
      CHECK(stationary_queue_variance(p) == doctest::Approx(rho / ((1 - rho) * (1 - rho))).epsilon(1e-13));
    }
  }

  TEST_CASE("stationary queue variance against the PGF") {
    for (double rho : {0.3, 0.7, 0.9}) {
      const Erlang e{3, 3.0};
      CHECK(stationary_queue_variance(Mg1Params{rho, e}) ==
            doctest::Approx(queue_variance_oracle([&](cd s) { return erlang_lst(3, 3.0, s); }, rho, rho))
                .epsilon(1e-9));
      const auto h = HyperExponential::balanced(1.0, 3.0);
      CHECK(stationary_queue_variance(Mg1Params{rho, h}) ==
            doctest::Approx(queue_variance_oracle([&](cd s) { return hyper_lst(h, s); }, rho, rho)).epsilon(1e-9));
      CHECK(queue_pgf(Mg1Params{rho, h}, 0.5) ==
            doctest::Approx((1 - rho) * 0.5 * hyper_lst(h, rho * 0.5).real() /
                            (hyper_lst(h, rho * 0.5).real() - 0.5))
                .epsilon(1e-13));
    }
  }

  TEST_CASE("busy period moments") {
    for (const ServiceSpec& s : {ServiceSpec(Erlang{2, 2.0}), ServiceSpec(HyperExponential::balanced(1.0, 2.0)),
                                 ServiceSpec(daley_counterexample()), ServiceSpec(LogNormal{2.0, 1.0})}) {
      const double lambda = 0.6;
      const auto m = service_moments(s);
      const double r = 1.0 - lambda * m.g1;
      const auto b = busy_period_moments(Mg1Params{lambda, s});
      CHECK(b.b1 == doctest::Approx(m.g1 / r).epsilon(1e-13));
      CHECK(b.b2 == doctest::Approx(m.g2 / std::pow(r, 3)).epsilon(1e-13));
      CHECK(b.b3 == doctest::Approx(m.g3 / std::pow(r, 4) + 3 * lambda * m.g2 * m.g2 / std::pow(r, 5)).epsilon(1e-13));
    }
  }

  TEST_CASE("busy period transform for M/M/1") {
    const double lambda = 0.5, mu = 1.0;
    for (double s : {1e-6, 0.1, 0.5, 3.0}) {
      const double a = lambda + mu + s;
      const double ref = (a - std::sqrt(a * a - 4 * lambda * mu)) / (2 * lambda);
      CHECK(busy_period_lst(Mg1Params{lambda, Exponential{mu}}, s).value == doctest::Approx(ref).epsilon(1e-12));
    }
    // The fixed point at unit load still converges at s > 0.
    CHECK(busy_period_lst(Mg1Params{1.0, Exponential{1.0}}, 0.5).value == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("coupling and covariance identities") {
    for (const ServiceSpec& s : {ServiceSpec(Exponential{1.0}), ServiceSpec(Erlang{2, 2.0}),
                                 ServiceSpec(HyperExponential::balanced(1.0, 5.0)), ServiceSpec(daley_counterexample()),
                                 ServiceSpec(LogNormal{2.0, 1.0}), ServiceSpec(Deterministic{1.0})}) {
      for (double rho : {0.3, 0.5, 0.85, 0.95}) {
        const Mg1Params p{rho, s};
        const double be = y_intercept_stationary(p).intercept;
        const double b0 = y_intercept_empty(p).intercept;
        const double s2 = stationary_queue_variance(p);
        CHECK(agrees(b0 + s2, be, 1e-10, 1e-10));
        CHECK(agrees(asymptotic_covariance_aq(p), s2 - be / 2, 1e-10, 1e-10));
        CHECK(y_intercept_arbitrary(p, 0.0) == doctest::Approx(b0).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("arbitrary start intercept for M/M/1") {
    CHECK(y_intercept_arbitrary(Mg1Params{0.5, Exponential{1.0}}, 5.0) == doctest::Approx(3.0).epsilon(1e-13));
  }

  TEST_CASE("lognormal example") {
    const Mg1Params p{0.85, LogNormal{2.0, 1.0}};
    CHECK(y_intercept_stationary(p).intercept == doctest::Approx(84.65).epsilon(1e-3));
  }

  TEST_CASE("transform limit recovers the stationary intercept") {
    for (const ServiceSpec& s : {ServiceSpec(Erlang{2, 2.0}), ServiceSpec(HyperExponential::balanced(1.0, 2.0)),
                                 ServiceSpec(Exponential{1.0}), ServiceSpec(Deterministic{1.0})}) {
      for (double rho : {0.5, 0.85}) {
        const Mg1Params p{rho, s};
        const double be = y_intercept_stationary(p).intercept;
        CHECK(std::abs(b_star_limit(p).value - be) <= 1e-3 * std::abs(be) + 1e-9);
      }
    }
  }

  TEST_CASE("Poisson output has a vanishing transform correction") {
    const Mg1Params p{0.5, Exponential{1.0}};
    for (double s : {0.05, 0.5, 2.0}) {
      CHECK(std::abs(b_star(p, s).value) < 1e-12);
      CHECK(v_star(p, s) == doctest::Approx(0.5 / s).epsilon(1e-12));
    }
  }

  TEST_CASE("counterexample service") {
    for (double lambda : {0.25, 0.5, 0.75, 0.9}) {
      CHECK(std::abs(y_intercept_stationary(Mg1Params{lambda, daley_counterexample()}).coefficient) < 1e-12);
    }
    const Mg1Params p{0.75, daley_counterexample()};
    double m = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double s = 0.1 * std::pow(200.0, i / 200.0);
      m = std::max(m, std::abs(b_star(p, s).value));
    }
    CHECK(m > 0.01);
  }

  TEST_CASE("renewal intercepts against the Erlang counting oracle") {
    const double t = 30.0;
    for (int k : {2, 3, 5}) {
      const double scv = 1.0 / k, skew = 2.0 / std::sqrt(double(k));
      for (bool eq : {true, false}) {
        const auto r = renewal_intercepts(scv, skew, eq ? RenewalMode::Equilibrium : RenewalMode::Ordinary);
        CHECK(r.rate_coefficient == doctest::Approx(scv));
        CHECK(oracle::erlang_renewal_variance(k, t, eq) - scv * t == doctest::Approx(r.intercept).epsilon(1e-9));
      }
    }
    CHECK(renewal_intercepts(0.5, std::sqrt(2.0), RenewalMode::Equilibrium).intercept == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(renewal_intercepts(0.5, std::sqrt(2.0), RenewalMode::Ordinary).intercept == doctest::Approx(0.0625).epsilon(1e-14));
    CHECK(std::abs(renewal_intercepts(1.0, 2.0, RenewalMode::Equilibrium).intercept) < 1e-15);
    CHECK(std::abs(renewal_intercepts(1.0, 2.0, RenewalMode::Ordinary).intercept) < 1e-15);
  }

  TEST_CASE("M/M/1 reference display is the empty-start intercept") {
    const auto a = mm1_variance_asymptote(0.5, 1.0);
    CHECK(a.regime == Mm1Regime::Stable);
    CHECK(a.rate == 0.5);
    CHECK(a.intercept == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(a.intercept == doctest::Approx(y_intercept_empty(Mg1Params{0.5, Exponential{1.0}}).intercept).epsilon(1e-12));
    // A long buffer started empty has the same line.
    const Mm1kParams k{0.5, 1.0, 120};
    const auto m = build_map(k);
    const auto b = deviation_bundle(m);
    CHECK(y_intercept_arbitrary(m, b, PhaseDistribution::point_mass(m.size(), 0)) ==
          doctest::Approx(a.intercept).epsilon(1e-9));
    const auto over = mm1_variance_asymptote(2.0, 1.0);
    CHECK(over.regime == Mm1Regime::Overloaded);
    CHECK(over.rate == 1.0);
    CHECK(over.intercept == doctest::Approx(-2.0).epsilon(1e-14));
    const auto crit = mm1_variance_asymptote(1.0, 1.0);
    CHECK(crit.regime == Mm1Regime::Critical);
    CHECK(crit.rate == doctest::Approx(0.7268).epsilon(1e-4));
    CHECK(crit.root_coefficient < 0.0);
  }

  TEST_CASE("error codes") {
    CHECK(code_of([] { y_intercept_stationary(Mg1Params{1.0, Exponential{1.0}}); }) == ErrorCode::UnstableQueue);
    CHECK(code_of([] { y_intercept_stationary(Mg1Params{0.5, RawMoments{1.0, 2.0, std::numeric_limits<double>::quiet_NaN()}}); }) ==
          ErrorCode::MissingThirdMoment);
    CHECK(code_of([] { b_star(Mg1Params{0.5, LogNormal{2.0, 1.0}}, 1.0); }) == ErrorCode::NoClosedFormLST);
    CHECK(code_of([] { Mg1Params{0.5, Erlang{0, 1.0}}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(b_star(Mg1Params{0.5, Erlang{2, 2.0}}, 1e-4).precision_loss);
    CHECK_FALSE(b_star(Mg1Params{0.5, Erlang{2, 2.0}}, 0.1).precision_loss);
  }

  TEST_CASE("service JSON") {
    const auto s = parse_service(R"({"family": "hyperexponential", "mean": 1, "scv": 3})");
    CHECK(service_stats(s).scv == doctest::Approx(3.0).epsilon(1e-13));
    const auto d = parse_service(R"({"family": "daley"})");
    CHECK(service_moments(d).g3 == 6.0);
    try {
      parse_service("{\n  \"family\": \"erlang\",\n  \"shape\": -1,\n  \"rate\": 1\n}", "svc.json");
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.what()).find("svc.json:3") != std::string::npos);
    }
  }
}
