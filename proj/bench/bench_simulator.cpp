// Serial reference vs OpenMP simulator, same seed; also checks the counts agree.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <omp.h>

#include "varcurve/io.hpp"
#include "varcurve/simulator.hpp"

using namespace varcurve;

namespace {

template <class Fn>
double seconds(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool run(const char* name, const SimConfig& cfg) {
  CountMatrix serial, parallel;
  const double ts = seconds([&] { serial = simulate_counts_serial(cfg); });
  const double tp = seconds([&] { parallel = simulate_counts(cfg); });
  const bool same = serial.values == parallel.values;
  std::printf("%-28s reps=%-7u serial=%8.3fs  openmp(%d)=%8.3fs  speedup=%5.2f  %s\n", name,
              cfg.replications, ts, omp_get_max_threads(), tp, ts / tp, same ? "identical" : "MISMATCH");
  return same;
}

}  // namespace

int main(int argc, char** argv) {
  const std::uint32_t reps = argc > 1 ? static_cast<std::uint32_t>(std::strtoul(argv[1], nullptr, 10)) : 4000;

  SimConfig mm1k;
  mm1k.model = Mm1kParams{1.0, 1.0, 10};
  mm1k.initial = EmptyStart{};
  mm1k.grid = arithmetic_grid(1.0, 300.0, 1.0);
  mm1k.replications = reps;
  mm1k.master_seed = 42;

  SimConfig mg1;
  mg1.model = Mg1Params{0.85, LogNormal{2.0, 1.0}};
  mg1.initial = WarmupStart{3000.0};
  mg1.grid = arithmetic_grid(4.0, 800.0, 4.0);
  mg1.replications = reps / 4;
  mg1.master_seed = 42;

  bool ok = run("mm1k K=10 rho=1", mm1k);
  ok = run("mg1 lognormal c2=2 rho=0.85", mg1) && ok;
  return ok ? 0 : 1;
}
