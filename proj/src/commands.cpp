#include "varcurve/commands.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "json_reader.hpp"
#include "varcurve/errors.hpp"

namespace varcurve {

using detail::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

ReportEntry plain(std::string name, double value, std::string provenance) {
  return {std::move(name), value, std::move(provenance), std::nullopt, {}};
}

ReportEntry checked(std::string name, double value, std::string provenance, double check,
                    std::string check_provenance) {
  return {std::move(name), value, std::move(provenance), check, std::move(check_provenance)};
}

double mixed_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

double ReportEntry::cross_check_error() const {
  return check ? mixed_error(value, *check) : 0.0;
}

const ReportEntry& Report::entry(std::string_view name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw Error(ErrorCode::InvalidArgument, "report has no entry " + std::string(name));
}

double Report::max_cross_check_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.cross_check_error());
  return m;
}

std::string Report::to_json() const {
  json j;
  j["command"] = command;
  json params = json::object();
  for (const auto& [k, v] : parameters) params[k] = number_or_null(v);
  j["parameters"] = params;
  json labs = json::object();
  for (const auto& [k, v] : labels) labs[k] = v;
  j["labels"] = labs;
  json list = json::array();
  for (const auto& e : entries) {
    json item;
    item["name"] = e.name;
    item["value"] = number_or_null(e.value);
    item["provenance"] = e.provenance;
    if (e.check) {
      item["check"] = number_or_null(*e.check);
      item["check_provenance"] = e.check_provenance;
      item["cross_check_error"] = number_or_null(e.cross_check_error());
    }
    list.push_back(item);
  }
  j["entries"] = list;
  j["max_cross_check_error"] = max_cross_check_error();
  return j.dump(2) + "\n";
}

CsvTable Report::to_csv() const {
  CsvTable t({"quantity", "value", "provenance", "check", "check_provenance", "cross_check_error"});
  for (const auto& [k, v] : parameters) t.add_row({k, format_number(v), "input", "", "", ""});
  for (const auto& [k, v] : labels) t.add_row({k, v, "input", "", "", ""});
  for (const auto& e : entries) {
    t.add_row({e.name, format_number(e.value), e.provenance, e.check ? format_number(*e.check) : "",
               e.check_provenance, e.check ? format_number(e.cross_check_error()) : ""});
  }
  return t;
}

ThetaSpec parse_theta(std::string_view text) {
  ThetaSpec spec;
  spec.text = std::string(text);
  auto bad = [&](const std::string& why) -> ThetaSpec {
    throw Error(ErrorCode::InvalidArgument, "initial distribution \"" + spec.text + "\": " + why);
  };
  if (text == "stationary" || text == "pi") {
    spec.kind = ThetaSpec::Kind::Stationary;
  } else if (text == "alpha" || text == "event_stationary") {
    spec.kind = ThetaSpec::Kind::Alpha;
  } else if (text == "empty") {
    spec.kind = ThetaSpec::Kind::Point;
    spec.index = 0;
  } else if (text == "full") {
    spec.kind = ThetaSpec::Kind::Last;
  } else if (text.starts_with("e:")) {
    spec.kind = ThetaSpec::Kind::Point;
    const std::string digits(text.substr(2));
    std::size_t used = 0;
    long v = -1;
    try {
      v = std::stol(digits, &used);
    } catch (const std::exception&) {
      return bad("expected e:<phase index>");
    }
    if (used != digits.size() || v < 0) return bad("expected e:<phase index>");
    spec.index = static_cast<std::size_t>(v);
  } else if (text.starts_with("pmf:")) {
    spec.kind = ThetaSpec::Kind::Pmf;
    std::string body(text.substr(4));
    if (body.starts_with("@")) {
      const std::string path = body.substr(1);
      const std::string wrapped = "{\"pmf\": " + read_text(path) + "}";
      detail::JsonReader in(wrapped, path);
      spec.pmf = in.numbers(in.root()["pmf"], "pmf");
    } else {
      std::size_t pos = 0;
      while (pos <= body.size()) {
        const auto comma = body.find(',', pos);
        const std::string cell = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
          std::size_t used = 0;
          spec.pmf.push_back(std::stod(cell, &used));
          if (used != cell.size()) return bad("bad number \"" + cell + "\"");
        } catch (const std::exception&) {
          return bad("bad number \"" + cell + "\"");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
  } else {
    return bad("expected stationary, alpha, empty, full, e:<i> or pmf:<list>");
  }
  return spec;
}

PhaseDistribution resolve_theta(const ThetaSpec& spec, const MarkovArrivalProcess& map,
                                const DeviationBundle& bundle) {
  const std::size_t n = map.size();
  switch (spec.kind) {
    case ThetaSpec::Kind::Stationary: return PhaseDistribution(bundle.stationary);
    case ThetaSpec::Kind::Alpha: return event_stationary_distribution(map, bundle);
    case ThetaSpec::Kind::Last: return PhaseDistribution::point_mass(n, n - 1);
    case ThetaSpec::Kind::Point:
      if (spec.index >= n) {
        throw Error(ErrorCode::InvalidArgument, "initial phase " + std::to_string(spec.index) +
                                                    " outside 0.." + std::to_string(n - 1));
      }
      return PhaseDistribution::point_mass(n, spec.index);
    case ThetaSpec::Kind::Pmf: {
      if (spec.pmf.size() > n) {
        throw Error(ErrorCode::InvalidArgument, "initial pmf has more entries than phases");
      }
      Vector p(n, 0.0);
      std::copy(spec.pmf.begin(), spec.pmf.end(), p.begin());
      return PhaseDistribution(std::move(p));
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown initial distribution");
}

Report mm1k_report(const Mm1kParams& p, const ThetaSpec& theta_spec) {
  p.validate();
  Report r;
  r.command = "mm1k";
  r.parameters = {{"lambda", p.arrival_rate},
                  {"mu", p.service_rate},
                  {"K", static_cast<double>(p.capacity)},
                  {"rho", p.load()}};
  r.labels = {{"theta", theta_spec.text}};

  const MarkovArrivalProcess map = build_map(p);
  const DeviationBundle bundle = deviation_bundle(map);
  const VarianceAsymptote cf = asymptote_closed_form(p);
  const VarianceAsymptote gen = variance_asymptote_stationary(map, bundle);
  const DrazinCorners corners = drazin_corners(p);
  const std::size_t k = static_cast<std::size_t>(p.capacity);
  const Vector labels = state_labels(p);
  const PhaseDistribution pi(bundle.stationary);
  const PhaseDistribution theta = resolve_theta(theta_spec, map, bundle);

  r.entries.push_back(checked("lambda_star", cf.event_rate, "closed-form", gen.event_rate, "generic-MAP"));
  r.entries.push_back(checked("v_bar", cf.rate, "closed-form", gen.rate, "generic-MAP"));
  r.entries.push_back(checked("b_e", cf.intercept, "closed-form", gen.intercept, "generic-MAP"));
  r.entries.push_back(checked("drazin_corner", corners.deviation, "closed-form", bundle.drazin(k, 0),
                              "generic-MAP"));
  r.entries.push_back(checked("drazin_squared_corner", corners.deviation_squared, "closed-form",
                              bundle.drazin_squared(k, 0), "generic-MAP"));
  r.entries.push_back(checked("covariance", covariance_closed_form(p), "closed-form",
                              asymptotic_covariance(map, bundle, pi, labels), "generic-MAP"));
  r.entries.push_back(checked("mean_queue_length", mean_queue_length(p), "closed-form",
                              dot(bundle.stationary, labels), "generic-MAP"));
  const double b_theta = y_intercept_arbitrary(map, bundle, theta);
  r.entries.push_back(plain("b_theta", b_theta, "generic-MAP"));
  r.entries.push_back(plain("b_theta_minus_b_e", b_theta - gen.intercept, "generic-MAP"));
  r.entries.push_back(
      plain("covariance_theta", asymptotic_covariance(map, bundle, theta, labels), "generic-MAP"));
  return r;
}

Report mg1_report(const Mg1Params& p, std::optional<double> initial_variance) {
  p.validate();
  Report r;
  r.command = "mg1";
  const ServiceMoments m = service_moments(p.service);
  const ServiceStats st = service_stats(p.service);
  const double rho = p.load();
  r.parameters = {{"lambda", p.arrival_rate}, {"rho", rho}, {"g1", m.g1}, {"g2", m.g2}, {"g3", m.g3}};
  r.labels = {{"service", describe(p.service)}};
  if (initial_variance) r.parameters.emplace_back("initial_variance", *initial_variance);

  r.entries.push_back(plain("c2", st.scv, "closed-form"));
  r.entries.push_back(plain("gamma_c3", st.third, "closed-form"));
  if (st.scv > 0.0) r.entries.push_back(plain("gamma", st.skewness(), "closed-form"));

  p.require_stable();
  const InterceptResult e = y_intercept_stationary(p);
  const InterceptResult z = y_intercept_empty(p);
  const double sigma2 = stationary_queue_variance(p);
  const double scale = rho / ((1.0 - rho) * (1.0 - rho));
  if (has_closed_form_lst(p.service)) {
    const double limit = b_star_limit(p).value;
    r.entries.push_back(checked("L_e", e.coefficient, "closed-form", limit / scale, "transform-limit"));
  } else {
    r.entries.push_back(plain("L_e", e.coefficient, "closed-form"));
  }
  r.entries.push_back(plain("b_e", e.intercept, "closed-form"));
  r.entries.push_back(plain("L_0", z.coefficient, "closed-form"));
  r.entries.push_back(checked("b_0", z.intercept, "closed-form", e.intercept - sigma2, "coupling-identity"));
  r.entries.push_back(plain("sigma2_pi", sigma2, "closed-form"));
  r.entries.push_back(checked("c_AQ", asymptotic_covariance_aq(p), "closed-form",
                              sigma2 - e.intercept / 2.0, "proof-identity"));
  const BusyPeriodMoments bp = busy_period_moments(p);
  r.entries.push_back(plain("busy_b1", bp.b1, "closed-form"));
  r.entries.push_back(plain("busy_b2", bp.b2, "closed-form"));
  r.entries.push_back(plain("busy_b3", bp.b3, "closed-form"));
  if (initial_variance) {
    r.entries.push_back(plain("b_theta", y_intercept_arbitrary(p, *initial_variance), "closed-form"));
  }
  return r;
}

Report map_report(const MapFile& file, const ThetaSpec& theta_spec, bool transient_check) {
  const MarkovArrivalProcess& map = file.map;
  Report r;
  r.command = "map";
  r.parameters = {{"phases", static_cast<double>(map.size())}};
  r.labels = {{"theta", theta_spec.text}};
  const DeviationBundle bundle = deviation_bundle(map);
  const VarianceAsymptote a = variance_asymptote_stationary(map, bundle);
  const PhaseDistribution theta = resolve_theta(theta_spec, map, bundle);
  const PhaseDistribution pi(bundle.stationary);
  const double b_theta = y_intercept_arbitrary(map, bundle, theta);

  r.entries.push_back(plain("lambda_star", a.event_rate, "generic-MAP"));
  r.entries.push_back(plain("v_bar", a.rate, "generic-MAP"));
  r.entries.push_back(checked("b_e", a.intercept, "generic-MAP", y_intercept_arbitrary(map, bundle, pi),
                              "generic-MAP-arbitrary"));
  r.entries.push_back(plain("b_theta", b_theta, "generic-MAP"));
  r.entries.push_back(plain("b_alpha", y_intercept_arbitrary(map, bundle, event_stationary_distribution(map, bundle)),
                            "generic-MAP"));
  r.entries.push_back(plain("covariance", asymptotic_covariance(map, bundle, pi, file.labels), "generic-MAP"));
  r.entries.push_back(
      plain("covariance_theta", asymptotic_covariance(map, bundle, theta, file.labels), "generic-MAP"));
  if (transient_check) {
    const double gap = spectral_gap_estimate(map.generator(), bundle.stationary);
    const double horizon = 60.0 / gap;
    r.parameters.emplace_back("horizon", horizon);
    r.entries.push_back(checked("variance_at_horizon", a.rate * horizon + b_theta, "generic-MAP",
                                transient_variance(map, theta, horizon), "transient-oracle"));
  }
  return r;
}

Report renewal_report(double scv, double skewness) {
  Report r;
  r.command = "renewal";
  r.parameters = {{"c2", scv}, {"gamma", skewness}};
  const RenewalAsymptote eq = renewal_intercepts(scv, skewness, RenewalMode::Equilibrium);
  const RenewalAsymptote ord = renewal_intercepts(scv, skewness, RenewalMode::Ordinary);
  r.entries.push_back(plain("rate_coefficient", eq.rate_coefficient, "closed-form"));
  r.entries.push_back(plain("intercept_equilibrium", eq.intercept, "closed-form"));
  r.entries.push_back(plain("intercept_ordinary", ord.intercept, "closed-form"));
  return r;
}

std::optional<SweepKind> sweep_kind_from_string(std::string_view name) {
  if (name == "intercept") return SweepKind::Intercept;
  if (name == "initial") return SweepKind::Initial;
  if (name == "alpha") return SweepKind::Alpha;
  if (name == "covariance") return SweepKind::Covariance;
  if (name == "mg1") return SweepKind::Mg1;
  return std::nullopt;
}

SweepSpec default_sweep(SweepKind kind) {
  SweepSpec s;
  s.kind = kind;
  switch (kind) {
    case SweepKind::Intercept:
    case SweepKind::Alpha:
    case SweepKind::Covariance:
      s.capacities = {10, 40, 100, 400};
      s.lambdas = arithmetic_grid(0.5, 1.5, 0.005);
      break;
    case SweepKind::Initial:
      s.capacities = {20, 200};
      s.lambdas = {0.8, 1.0, 1.2};
      break;
    case SweepKind::Mg1:
      s.service = LogNormal{2.0, 1.0};
      s.rhos = arithmetic_grid(0.05, 0.95, 0.05);
      break;
  }
  return s;
}

SweepSpec parse_sweep_config(std::string_view text, std::string_view source) {
  detail::JsonReader in(text, source);
  in.expect_format(kSweepFormat);
  const json& root = in.root();
  const std::string kind_name = in.string(root, "", "kind");
  const auto kind = sweep_kind_from_string(kind_name);
  if (!kind) in.fail("kind", "unknown sweep kind \"" + kind_name + "\"");
  SweepSpec s = default_sweep(*kind);
  s.service_rate = in.number_or(root, "", "service_rate", s.service_rate);
  if (!(s.service_rate > 0.0)) in.fail("service_rate", "must be positive");
  if (const json* caps = in.optional(root, "capacities")) {
    s.capacities.clear();
    for (double c : in.numbers(*caps, "capacities")) {
      if (c < 1 || c != std::floor(c) || c > 5000) in.fail("capacities", "capacities must be integers in 1..5000");
      s.capacities.push_back(static_cast<int>(c));
    }
  }
  if (const json* l = in.optional(root, "lambda")) s.lambdas = detail::read_grid(in, *l, "lambda");
  if (const json* l = in.optional(root, "rho")) s.rhos = detail::read_grid(in, *l, "rho");
  if (const json* sv = in.optional(root, "service")) s.service = detail::read_service(in, *sv, "service");
  s.generic_max_capacity = static_cast<int>(in.integer_or(root, "", "generic_max_capacity", s.generic_max_capacity));
  for (double l : s.lambdas) {
    if (!(l > 0.0)) in.fail("lambda", "arrival rates must be positive");
  }
  for (double r : s.rhos) {
    if (!(r > 0.0 && r < 1.0)) in.fail("rho", "loads must lie in (0, 1)");
  }
  return s;
}

namespace {

// Evaluates rows concurrently into fixed slots so the output order never
// depends on scheduling.
template <class Fn>
std::vector<std::vector<double>> evaluate_rows(std::size_t count, Fn&& fn) {
  std::vector<std::vector<double>> rows(count);
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      rows[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

}  // namespace

CsvTable run_sweep(const SweepSpec& spec, double* max_error) {
  double worst = 0.0;
  std::vector<std::pair<int, double>> pairs;
  for (int k : spec.capacities) {
    for (double l : spec.lambdas) pairs.emplace_back(k, l);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CsvTable table({});

  auto add = [&](const std::vector<std::vector<double>>& rows, std::size_t check_column) {
    for (const auto& row : rows) {
      std::vector<std::string> cells;
      for (std::size_t c = 0; c < row.size(); ++c) {
        cells.push_back(std::isnan(row[c]) ? std::string() : format_number(row[c]));
      }
      if (check_column < row.size() && !std::isnan(row[check_column])) {
        worst = std::max(worst, row[check_column]);
      }
      table.add_row(std::move(cells));
    }
  };

  switch (spec.kind) {
    case SweepKind::Intercept: {
      table = CsvTable({"K", "lambda", "rho", "lambda_star", "v_bar", "b_e", "b_e_generic", "cross_check_error"});
      add(evaluate_rows(pairs.size(),
                        [&](std::size_t i) {
                          const Mm1kParams p{pairs[i].second, spec.service_rate, pairs[i].first};
                          const VarianceAsymptote a = asymptote_closed_form(p);
                          double g = nan, err = nan;
                          if (p.capacity <= spec.generic_max_capacity) {
                            const auto map = build_map(p);
                            g = variance_asymptote_stationary(map, deviation_bundle(map)).intercept;
                            err = mixed_error(a.intercept, g);
                          }
                          return std::vector<double>{double(p.capacity), p.arrival_rate, p.load(),
                                                     a.event_rate, a.rate, a.intercept, g, err};
                        }),
          7);
      break;
    }
    case SweepKind::Initial: {
      table = CsvTable({"K", "lambda", "i", "i_over_K", "b_theta", "b_theta_over_K2"});
      const auto blocks = evaluate_rows(pairs.size(), [&](std::size_t i) {
        const Mm1kParams p{pairs[i].second, spec.service_rate, pairs[i].first};
        const auto map = build_map(p);
        const auto bundle = deviation_bundle(map);
        std::vector<double> flat;
        const double k2 = double(p.capacity) * p.capacity;
        for (int s = 0; s <= p.capacity; ++s) {
          const double b = y_intercept_arbitrary(map, bundle, PhaseDistribution::point_mass(map.size(), s));
          flat.insert(flat.end(), {double(p.capacity), p.arrival_rate, double(s), double(s) / p.capacity, b, b / k2});
        }
        return flat;
      });
      for (const auto& block : blocks) {
        std::vector<std::vector<double>> rows;
        for (std::size_t j = 0; j + 6 <= block.size(); j += 6) rows.emplace_back(block.begin() + j, block.begin() + j + 6);
        add(rows, 99);
      }
      break;
    }
    case SweepKind::Alpha: {
      table = CsvTable({"K", "lambda", "rho", "b_e", "b_alpha", "b_alpha_minus_b_e"});
      add(evaluate_rows(pairs.size(),
                        [&](std::size_t i) {
                          const Mm1kParams p{pairs[i].second, spec.service_rate, pairs[i].first};
                          const auto map = build_map(p);
                          const auto bundle = deviation_bundle(map);
                          const double be = variance_asymptote_stationary(map, bundle).intercept;
                          const double ba =
                              y_intercept_arbitrary(map, bundle, event_stationary_distribution(map, bundle));
                          return std::vector<double>{double(p.capacity), p.arrival_rate, p.load(), be, ba, ba - be};
                        }),
          99);
      break;
    }
    case SweepKind::Covariance: {
      table = CsvTable({"K", "lambda", "rho", "covariance", "covariance_generic", "cross_check_error"});
      add(evaluate_rows(pairs.size(),
                        [&](std::size_t i) {
                          const Mm1kParams p{pairs[i].second, spec.service_rate, pairs[i].first};
                          const double c = covariance_closed_form(p);
                          double g = nan, err = nan;
                          if (p.capacity <= spec.generic_max_capacity) {
                            const auto map = build_map(p);
                            const auto bundle = deviation_bundle(map);
                            g = asymptotic_covariance(map, bundle, PhaseDistribution(bundle.stationary),
                                                      state_labels(p));
                            err = mixed_error(c, g);
                          }
                          return std::vector<double>{double(p.capacity), p.arrival_rate, p.load(), c, g, err};
                        }),
          5);
      break;
    }
    case SweepKind::Mg1: {
      table = CsvTable({"rho", "L_e", "b_e", "L_0", "b_0", "sigma2_pi", "c_AQ"});
      const double g1 = service_moments(spec.service).g1;
      add(evaluate_rows(spec.rhos.size(),
                        [&](std::size_t i) {
                          const Mg1Params p{spec.rhos[i] / g1, spec.service};
                          const InterceptResult e = y_intercept_stationary(p);
                          const InterceptResult z = y_intercept_empty(p);
                          return std::vector<double>{p.load(), e.coefficient, e.intercept, z.coefficient,
                                                     z.intercept, stationary_queue_variance(p),
                                                     asymptotic_covariance_aq(p)};
                        }),
          99);
      break;
    }
  }
  if (max_error) *max_error = worst;
  return table;
}

CsvTable daley_scan(double arrival_rate, double s_min, double s_max, std::size_t points,
                    double* max_abs) {
  if (!(s_min > 0.0) || !(s_max > s_min) || points < 2) {
    throw Error(ErrorCode::InvalidArgument, "daley scan needs 0 < s_min < s_max and at least 2 points");
  }
  const Mg1Params p{arrival_rate, daley_counterexample()};
  p.require_stable();
  const double ratio = std::log(s_max / s_min);
  const auto rows = evaluate_rows(points, [&](std::size_t i) {
    const double s = i + 1 == points ? s_max : s_min * std::exp(ratio * double(i) / double(points - 1));
    return std::vector<double>{s, b_star(p, s).value};
  });
  CsvTable t({"s", "b_star"});
  double m = 0.0;
  for (const auto& row : rows) {
    t.add_numbers(row);
    m = std::max(m, std::abs(row[1]));
  }
  if (max_abs) *max_abs = m;
  return t;
}

namespace {

void mm1k_reference(const Mm1kParams& p, const InitialCondition& init, SimulationOutput& out) {
  const auto map = build_map(p);
  const auto bundle = deviation_bundle(map);
  const std::size_t n = map.size();
  std::string source;
  const PhaseDistribution theta = std::visit(
      overloaded{[&](const EmptyStart&) { source = "empty"; return PhaseDistribution::point_mass(n, 0); },
                 [&](const FixedStart& f) {
                   source = "fixed";
                   return PhaseDistribution::point_mass(n, static_cast<std::size_t>(f.level));
                 },
                 [&](const PmfStart& s) {
                   source = "pmf";
                   Vector v(n, 0.0);
                   std::copy(s.pmf.begin(), s.pmf.end(), v.begin());
                   return PhaseDistribution(std::move(v));
                 },
                 [&](const WarmupStart&) { source = "stationary"; return PhaseDistribution(bundle.stationary); },
                 [&](const EventStationaryStart&) {
                   source = "alpha";
                   return event_stationary_distribution(map, bundle);
                 }},
      init);
  out.reference_slope = variance_asymptote_stationary(map, bundle).rate;
  out.reference_intercept = y_intercept_arbitrary(map, bundle, theta);
  out.reference_source = "mm1k generic-MAP, theta = " + source;
}

void mg1_reference(const Mg1Params& p, const InitialCondition& init, SimulationOutput& out) {
  if (!(p.load() < 1.0)) return;
  const ServiceMoments m = service_moments(p.service);
  if (!std::isfinite(m.g3)) return;
  std::optional<double> initial_variance;
  std::string source;
  std::visit(overloaded{[&](const EmptyStart&) { initial_variance = 0.0, source = "empty"; },
                        [&](const FixedStart&) { initial_variance = 0.0, source = "fixed"; },
                        [&](const PmfStart& s) {
                          double mean = 0.0, sq = 0.0;
                          for (std::size_t i = 0; i < s.pmf.size(); ++i) {
                            mean += s.pmf[i] * double(i);
                            sq += s.pmf[i] * double(i) * double(i);
                          }
                          initial_variance = sq - mean * mean;
                          source = "pmf";
                        },
                        [&](const WarmupStart&) { source = "stationary"; },
                        [&](const EventStationaryStart&) {}},
             init);
  out.reference_slope = p.arrival_rate;
  out.reference_intercept = initial_variance ? y_intercept_arbitrary(p, *initial_variance)
                                             : y_intercept_stationary(p).intercept;
  out.reference_source = "mg1 closed-form, start = " + source;
}

}  // namespace

SimulationOutput run_simulation(const SimulationJob& job) {
  SimulationOutput out;
  const CountMatrix counts = simulate_counts(job.config);
  out.estimate = estimate_variance_curve(counts, job.config.grid);
  out.fit = fit_linear_tail(out.estimate, job.window_fraction);
  std::visit(overloaded{[&](const Mm1kParams& p) { mm1k_reference(p, job.config.initial, out); },
                        [&](const Mg1Params& p) { mg1_reference(p, job.config.initial, out); }},
             job.config.model);
  return out;
}

CsvTable curve_csv(const VarianceCurveEstimate& est) {
  CsvTable t({"t", "mean", "var", "ci_lo", "ci_hi"});
  for (std::size_t i = 0; i < est.t.size(); ++i) {
    t.add_numbers({est.t[i], est.mean[i], est.variance[i], est.ci_low(i), est.ci_high(i)});
  }
  return t;
}

std::string simulation_summary_json(const SimulationJob& job, const SimulationOutput& out) {
  json j;
  j["format"] = "varcurve-sim-summary/1";
  const SimConfig& cfg = job.config;
  std::visit(overloaded{[&](const Mm1kParams& p) {
                          j["model"] = {{"type", "mm1k"},
                                        {"arrival_rate", p.arrival_rate},
                                        {"service_rate", p.service_rate},
                                        {"capacity", p.capacity}};
                        },
                        [&](const Mg1Params& p) {
                          j["model"] = {{"type", "mg1"},
                                        {"arrival_rate", p.arrival_rate},
                                        {"service", describe(p.service)},
                                        {"rho", p.load()}};
                        }},
             cfg.model);
  j["replications"] = cfg.replications;
  j["seed"] = cfg.master_seed;
  j["grid"] = {{"points", cfg.grid.size()}, {"first", cfg.grid.front()}, {"last", cfg.grid.back()}};
  const LinearTailFit& f = out.fit;
  const char* method = f.error_method == LinearTailFit::ErrorMethod::Jackknife ? "jackknife"
                       : f.error_method == LinearTailFit::ErrorMethod::Model   ? "model"
                                                                               : "residual";
  j["fit"] = {{"slope", f.slope},
              {"slope_se", f.slope_se},
              {"intercept", f.intercept},
              {"intercept_se", f.intercept_se},
              {"t_low", f.t_low},
              {"t_high", f.t_high},
              {"points", f.points},
              {"window_fraction", job.window_fraction},
              {"residual_rms", f.residual_rms},
              {"error_method", method}};
  if (out.reference_slope && out.reference_intercept) {
    j["reference"] = {{"slope", *out.reference_slope},
                      {"intercept", *out.reference_intercept},
                      {"source", out.reference_source}};
    j["z"] = {{"slope", number_or_null((f.slope - *out.reference_slope) / f.slope_se)},
              {"intercept", number_or_null((f.intercept - *out.reference_intercept) / f.intercept_se)}};
  } else {
    j["reference"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace varcurve
