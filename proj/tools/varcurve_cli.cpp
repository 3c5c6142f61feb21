#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "varcurve/commands.hpp"
#include "varcurve/errors.hpp"
#include "varcurve/tolerances.hpp"

using namespace varcurve;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitCrossCheck = 3;
constexpr int kExitNonConvergence = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonConvergence:
    case ErrorCode::StepSizeUnderflow:
    case ErrorCode::NumericalFailure:
      return kExitNonConvergence;
    case ErrorCode::SingularMatrix:
      return 1;
    default:
      return kExitValidation;
  }
}

struct Output {
  std::string path;
  std::string format = "csv";
};

void emit(const Output& out, const std::string& text) {
  if (out.path.empty() || out.path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(out.path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + out.path);
  f << text;
}

std::string table_json(const CsvTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows()) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c].empty()) {
        obj[t.header()[c]] = nullptr;
      } else {
        obj[t.header()[c]] = std::stod(row[c]);
      }
    }
    rows.push_back(obj);
  }
  return rows.dump(2) + "\n";
}

std::string render(const Output& out, const CsvTable& t) {
  return out.format == "json" ? table_json(t) : t.str();
}

int finish_report(const Output& out, const Report& r) {
  emit(out, out.format == "json" ? r.to_json() : r.to_csv().str());
  const double err = r.max_cross_check_error();
  if (err > kTolerances.cross_check) {
    std::cerr << "varcurve: cross-check error " << format_number(err) << " exceeds "
              << format_number(kTolerances.cross_check) << "\n";
    return kExitCrossCheck;
  }
  return 0;
}

void add_output_options(CLI::App* app, Output& out) {
  app->add_option("--out", out.path, "Output file (default stdout)");
  app->add_option("--format", out.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

ServiceSpec service_from_argument(const std::string& arg) {
  if (!arg.empty() && arg.front() == '@') {
    const std::string path = arg.substr(1);
    return parse_service(read_text(path), path);
  }
  return parse_service(arg, "--service");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance of departure counts in queues: analytics, sweeps and simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "varcurve 1.0.0");

  Output out;
  int rc = 0;

  // mm1k
  Mm1kParams mm1k{1.0, 1.0, 10};
  std::string theta_text = "stationary";
  auto* c_mm1k = app.add_subcommand("mm1k", "M/M/1/K asymptote, closed form against the generic MAP");
  c_mm1k->add_option("--lambda", mm1k.arrival_rate, "Arrival rate")->required();
  c_mm1k->add_option("--mu", mm1k.service_rate, "Service rate")->capture_default_str();
  c_mm1k->add_option("-K,--capacity", mm1k.capacity, "System capacity")->required();
  c_mm1k->add_option("--theta", theta_text,
                     "Initial distribution: stationary, alpha, empty, full, e:<i>, pmf:<list>, pmf:@<file>")
      ->capture_default_str();
  add_output_options(c_mm1k, out);
  c_mm1k->callback([&] { rc = finish_report(out, mm1k_report(mm1k, parse_theta(theta_text))); });

  // mg1
  double mg1_lambda = 0.0;
  std::string service_text;
  std::optional<double> sigma0;
  auto* c_mg1 = app.add_subcommand("mg1", "M/G/1 intercepts and queue-length moments");
  c_mg1->add_option("--lambda", mg1_lambda, "Arrival rate")->required();
  c_mg1->add_option("--service", service_text, "Service spec as JSON text or @file")->required();
  c_mg1->add_option("--sigma0-sq", sigma0, "Variance of the initial queue length");
  add_output_options(c_mg1, out);
  c_mg1->callback([&] {
    rc = finish_report(out, mg1_report(Mg1Params{mg1_lambda, service_from_argument(service_text)}, sigma0));
  });

  // map
  std::string map_path;
  bool transient = false;
  auto* c_map = app.add_subcommand("map", "Asymptote of a MAP read from a file");
  c_map->add_option("--file", map_path, "MAP file (varcurve-map/1)")->required();
  c_map->add_option("--theta", theta_text, "Initial distribution, as for mm1k")->capture_default_str();
  c_map->add_flag("--transient-check", transient, "Compare against the transient variance at a long horizon");
  add_output_options(c_map, out);
  c_map->callback([&] { rc = finish_report(out, map_report(load_map(map_path), parse_theta(theta_text), transient)); });

  // sweep
  std::string sweep_kind;
  std::string sweep_config;
  auto* c_sweep = app.add_subcommand("sweep", "Parameter sweeps: intercept, initial, alpha, covariance, mg1");
  c_sweep->add_option("--kind", sweep_kind, "Sweep kind (defaults apply when no config is given)")
      ->check(CLI::IsMember({"intercept", "initial", "alpha", "covariance", "mg1"}));
  c_sweep->add_option("--config", sweep_config, "Sweep config (varcurve-sweep/1)");
  add_output_options(c_sweep, out);
  c_sweep->callback([&] {
    SweepSpec spec;
    if (!sweep_config.empty()) {
      spec = parse_sweep_config(read_text(sweep_config), sweep_config);
      if (!sweep_kind.empty() && *sweep_kind_from_string(sweep_kind) != spec.kind) {
        throw Error(ErrorCode::InvalidArgument, "--kind disagrees with the config file");
      }
    } else if (!sweep_kind.empty()) {
      spec = default_sweep(*sweep_kind_from_string(sweep_kind));
    } else {
      throw Error(ErrorCode::InvalidArgument, "sweep needs --kind or --config");
    }
    double worst = 0.0;
    emit(out, render(out, run_sweep(spec, &worst)));
    if (worst > kTolerances.cross_check) {
      std::cerr << "varcurve: cross-check error " << format_number(worst) << " exceeds "
                << format_number(kTolerances.cross_check) << "\n";
      rc = kExitCrossCheck;
    }
  });

  // daley
  double daley_lambda = 0.75, s_min = 0.05, s_max = 20.0;
  std::size_t points = 400;
  auto* c_daley = app.add_subcommand("daley", "b*(s) scan for the counterexample service");
  c_daley->add_option("--lambda", daley_lambda, "Arrival rate")->capture_default_str();
  c_daley->add_option("--s-min", s_min, "Smallest s")->capture_default_str();
  c_daley->add_option("--s-max", s_max, "Largest s")->capture_default_str();
  c_daley->add_option("--points", points, "Grid points (geometric)")->capture_default_str();
  add_output_options(c_daley, out);
  c_daley->callback([&] {
    double m = 0.0;
    emit(out, render(out, daley_scan(daley_lambda, s_min, s_max, points, &m)));
    std::cerr << "max |b*(s)| = " << format_number(m) << "\n";
  });

  // simulate
  std::string sim_config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::uint32_t> replications;
  std::string summary_path;
  auto* c_sim = app.add_subcommand("simulate", "Replicated simulation of the departure-count variance");
  c_sim->add_option("--config", sim_config, "Simulation config (varcurve-sim/1)")->required();
  c_sim->add_option("--seed", seed, "Master seed (overrides the config)");
  c_sim->add_option("--threads", threads, "Worker threads (0 = OpenMP default)");
  c_sim->add_option("--replications", replications, "Replications (overrides the config)");
  c_sim->add_option("--summary", summary_path, "Summary JSON path (default <out>.summary.json)");
  add_output_options(c_sim, out);
  c_sim->callback([&] {
    SimulationJob job = load_sim_config(sim_config);
    if (seed) job.config.master_seed = *seed;
    if (threads) job.config.threads = *threads;
    if (replications) job.config.replications = *replications;
    const SimulationOutput result = run_simulation(job);
    const std::string summary = simulation_summary_json(job, result);
    if (out.format == "json") {
      emit(out, summary);
      return;
    }
    emit(out, curve_csv(result.estimate).str());
    std::string spath = summary_path;
    if (spath.empty() && !out.path.empty() && out.path != "-") spath = out.path + ".summary.json";
    if (spath.empty()) {
      std::cerr << summary;
    } else {
      emit(Output{spath, "json"}, summary);
    }
  });

  // renewal
  double scv = 1.0, skew = 2.0;
  auto* c_renewal = app.add_subcommand("renewal", "Renewal-process variance intercepts");
  c_renewal->add_option("--scv", scv, "Squared coefficient of variation")->required();
  c_renewal->add_option("--skewness", skew, "Skewness")->required();
  add_output_options(c_renewal, out);
  c_renewal->callback([&] { rc = finish_report(out, renewal_report(scv, skew)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  } catch (const Error& e) {
    std::cerr << "varcurve: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "varcurve: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
