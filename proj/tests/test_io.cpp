#include <clocale>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "varcurve/errors.hpp"
#include "varcurve/io.hpp"

using namespace varcurve;

namespace {

std::string parse_error(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    return e.what();
  }
  FAIL("expected ParseError");
  return {};
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("numbers round trip in shortest form") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(-2.5e-300) == "-2.5e-300");
    for (double x : {1.0 / 3.0, 84.65291666666664, 6253.344444375346, -1e-17}) {
      CHECK(std::stod(format_number(x)) == x);
    }
  }

  TEST_CASE("CSV quoting and line endings") {
    CsvTable t({"a", "b,c"});
    t.add_row({"x\"y", "plain"});
    t.add_numbers({1.5, -2.0});
    CHECK(t.str() == "a,\"b,c\"\r\n\"x\"\"y\",plain\r\n1.5,-2\r\n");
    CHECK_THROWS_AS(t.add_row({"only one"}), Error);
  }

  TEST_CASE("arithmetic grid includes the end point") {
    const auto g = arithmetic_grid(0.5, 1.5, 0.005);
    CHECK(g.size() == 201u);
    CHECK(g.back() == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(arithmetic_grid(4, 800, 4).size() == 200u);
    CHECK_THROWS_AS(arithmetic_grid(1, 0, 1), Error);
  }

  TEST_CASE("simulation config") {
    const auto job = parse_sim_config(R"({
      "format": "varcurve-sim/1",
      "model": {"type": "mm1k", "arrival_rate": 1, "service_rate": 1, "capacity": 10},
      "grid": [1, 2, 3],
      "replications": 100,
      "seed": "18446744073709551615",
      "threads": 2,
      "fit": {"window_fraction": 0.25}
    })");
    CHECK(job.config.master_seed == 18446744073709551615ull);
    CHECK(job.config.threads == 2);
    CHECK(job.window_fraction == 0.25);
    CHECK(std::holds_alternative<PmfStart>(job.config.initial));
    CHECK(job.config.grid.size() == 3u);

    const auto mg1 = parse_sim_config(R"({
      "format": "varcurve-sim/1",
      "model": {"type": "mg1", "arrival_rate": 0.5, "service": {"family": "erlang", "shape": 2, "rate": 2}},
      "initial": "empty",
      "grid": {"start": 1, "stop": 10, "step": 1},
      "replications": 10
    })");
    CHECK(std::holds_alternative<EmptyStart>(mg1.config.initial));
    CHECK(mg1.config.grid.size() == 10u);
  }

  TEST_CASE("config errors carry line numbers") {
    const std::string bad_type =
        "{\n\"format\": \"varcurve-sim/1\",\n\"model\": {\n  \"type\": \"mm2\"\n},\n\"grid\": [1], \"replications\": 3}";
    CHECK(parse_error([&] { parse_sim_config(bad_type, "c.json"); }).find("c.json:4") != std::string::npos);
    const std::string bad_reps =
        "{\"format\": \"varcurve-sim/1\",\n\"model\": {\"type\": \"mm1k\", \"arrival_rate\": 1, \"service_rate\": 1, "
        "\"capacity\": 2},\n\"grid\": [1],\n\"replications\": 1}";
    CHECK(parse_error([&] { parse_sim_config(bad_reps, "r.json"); }).find("r.json:4") != std::string::npos);
    CHECK(parse_error([&] { parse_sim_config("{\n\"format\": \n}", "m.json"); }).find("m.json:3") != std::string::npos);
    CHECK(parse_error([&] { parse_sim_config(R"({"format": "varcurve-sim/2"})"); }).find("format") != std::string::npos);
  }

  TEST_CASE("MAP file checks") {
    const auto f = parse_map(R"({"format": "varcurve-map/1", "phases": 2,
      "d0": [-2, 1, 0.5, -1], "d1": [1, 0, 0.25, 0.25]})");
    CHECK(f.map.size() == 2u);
    CHECK(f.labels == Vector{0, 1});
    parse_error([] { parse_map(R"({"format": "varcurve-map/1", "phases": 2, "d0": [-1, 1, 1], "d1": [0, 0, 0, 0]})"); });
  }

  TEST_CASE("formatting ignores the C locale") {
    const char* old = std::setlocale(LC_NUMERIC, nullptr);
    const std::string saved = old ? old : "C";
    if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8") != nullptr) {
      CHECK(format_number(0.25) == "0.25");
    }
    std::setlocale(LC_NUMERIC, saved.c_str());
  }
}
