#include "varcurve/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json_reader.hpp"
#include "varcurve/errors.hpp"

namespace varcurve {

namespace detail {

namespace {

std::size_t line_of(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset; ++i) line += text[i] == '\n';
  return line;
}

std::string last_key(const std::string& path) {
  std::string key = path.substr(path.find_last_of('.') == std::string::npos ? 0 : path.find_last_of('.') + 1);
  const auto bracket = key.find('[');
  if (bracket != std::string::npos) key.erase(bracket);
  return key;
}

}  // namespace

JsonReader::JsonReader(std::string_view text, std::string_view source) : text_(text), source_(source) {
  try {
    root_ = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte == 0 ? 0 : e.byte - 1;
    std::size_t col = 1;
    for (std::size_t i = byte; i > 0 && i <= text.size() && text[i - 1] != '\n'; --i) ++col;
    std::ostringstream os;
    os << source_ << ":" << line_of(text, byte) << ":" << col << ": malformed JSON ("
       << e.what() << ")";
    throw Error(ErrorCode::ParseError, os.str());
  }
  if (!root_.is_object()) fail("", "top level must be an object");
}

void JsonReader::fail(const std::string& path, const std::string& message) const {
  std::size_t line = 1;
  std::string p = path;
  // Walk up the path until some key is found in the text.
  while (!p.empty()) {
    const std::string needle = "\"" + last_key(p) + "\"";
    const auto pos = text_.find(needle);
    if (pos != std::string_view::npos) {
      line = line_of(text_, pos);
      break;
    }
    const auto dot = p.find_last_of('.');
    p = dot == std::string::npos ? std::string() : p.substr(0, dot);
  }
  std::ostringstream os;
  os << source_ << ":" << line << ": " << (path.empty() ? "document" : path) << ": " << message;
  throw Error(ErrorCode::ParseError, os.str());
}

const json* JsonReader::optional(const json& obj, const char* key) const {
  if (!obj.is_object()) return nullptr;
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& JsonReader::field(const json& obj, const std::string& path, const char* key) const {
  const std::string sub = path.empty() ? key : path + "." + key;
  if (!obj.is_object()) fail(path, "expected an object");
  const json* v = optional(obj, key);
  if (!v) fail(sub, "missing required field");
  return *v;
}

double JsonReader::number(const json& obj, const std::string& path, const char* key) const {
  const json& v = field(obj, path, key);
  const std::string sub = path.empty() ? key : path + "." + key;
  if (!v.is_number()) fail(sub, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(sub, "expected a finite number");
  return x;
}

double JsonReader::number_or(const json& obj, const std::string& path, const char* key,
                             double fallback) const {
  return optional(obj, key) ? number(obj, path, key) : fallback;
}

long JsonReader::integer(const json& obj, const std::string& path, const char* key) const {
  const json& v = field(obj, path, key);
  const std::string sub = path.empty() ? key : path + "." + key;
  if (!v.is_number_integer()) {
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) return static_cast<long>(x);
    }
    fail(sub, "expected an integer");
  }
  return v.get<long>();
}

long JsonReader::integer_or(const json& obj, const std::string& path, const char* key,
                            long fallback) const {
  return optional(obj, key) ? integer(obj, path, key) : fallback;
}

std::string JsonReader::string(const json& obj, const std::string& path, const char* key) const {
  const json& v = field(obj, path, key);
  if (!v.is_string()) fail(path.empty() ? key : path + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> JsonReader::numbers(const json& value, const std::string& path) const {
  if (!value.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) fail(path, "entry " + std::to_string(i) + " is not a number");
    const double x = value[i].get<double>();
    if (!std::isfinite(x)) fail(path, "entry " + std::to_string(i) + " is not finite");
    out.push_back(x);
  }
  return out;
}

void JsonReader::expect_format(std::string_view tag) const {
  const json* f = optional(root_, "format");
  if (!f) fail("format", "missing format tag, expected \"" + std::string(tag) + "\"");
  if (!f->is_string() || f->get<std::string>() != tag) {
    fail("format", "unsupported format, expected \"" + std::string(tag) + "\"");
  }
}

ServiceSpec read_service(const JsonReader& in, const json& v, const std::string& path) {
  const auto at = [&](const char* key) { return path.empty() ? std::string(key) : path + "." + key; };
  const auto positive = [&](const char* key) {
    const double x = in.number(v, path, key);
    if (!(x > 0.0) || !std::isfinite(x)) in.fail(at(key), "must be positive and finite");
    return x;
  };
  const std::string family = in.string(v, path, "family");
  ServiceSpec spec;
  if (family == "exponential") {
    spec = Exponential{positive("rate")};
  } else if (family == "deterministic") {
    spec = Deterministic{positive("value")};
  } else if (family == "erlang") {
    const long shape = in.integer(v, path, "shape");
    if (shape < 1 || shape > 100000) in.fail(at("shape"), "shape must lie in 1..100000");
    spec = Erlang{static_cast<int>(shape), positive("rate")};
  } else if (family == "hyperexponential") {
    if (in.optional(v, "weights")) {
      spec = HyperExponential{in.numbers(in.field(v, path, "weights"), path + ".weights"),
                              in.numbers(in.field(v, path, "rates"), path + ".rates")};
    } else {
      try {
        spec = HyperExponential::balanced(in.number(v, path, "mean"), in.number(v, path, "scv"));
      } catch (const Error& e) {
        in.fail(at("scv"), e.what());
      }
    }
  } else if (family == "lognormal") {
    spec = LogNormal{positive("scv"), in.optional(v, "mean") ? positive("mean") : 1.0};
  } else if (family == "daley") {
    spec = daley_counterexample();
  } else if (family == "mixture") {
    AtomMixturePlusExp m;
    m.exp_weight = in.number(v, path, "exp_weight");
    m.exp_rate = in.number_or(v, path, "exp_rate", 1.0);
    if (const json* atoms = in.optional(v, "atoms")) {
      if (!atoms->is_array()) in.fail(path + ".atoms", "expected [[weight, location], ...]");
      for (const json& a : *atoms) {
        const auto pair = in.numbers(a, path + ".atoms");
        if (pair.size() != 2) in.fail(path + ".atoms", "each atom is [weight, location]");
        m.atoms.push_back({pair[0], pair[1]});
      }
    }
    spec = m;
  } else if (family == "moments") {
    if (in.optional(v, "g1")) {
      spec = RawMoments{in.number(v, path, "g1"), in.number(v, path, "g2"),
                        in.number_or(v, path, "g3", std::numeric_limits<double>::quiet_NaN())};
    } else {
      try {
        spec = RawMoments::from_shape(in.number(v, path, "mean"), in.number(v, path, "scv"),
                                      in.number(v, path, "skewness"));
      } catch (const Error& e) {
        in.fail(at("scv"), e.what());
      }
    }
  } else {
    in.fail(at("family"), "unknown service family \"" + family + "\"");
  }
  try {
    validate(spec);
  } catch (const Error& e) {
    in.fail(at("family"), e.what());
  }
  return spec;
}

std::vector<double> read_grid(const JsonReader& in, const json& v, const std::string& path) {
  if (v.is_array()) return in.numbers(v, path);
  const double start = in.number(v, path, "start");
  const double stop = in.number(v, path, "stop");
  const double step = in.number(v, path, "step");
  if (!(step > 0.0) || stop < start) in.fail(path, "need step > 0 and stop >= start");
  if ((stop - start) / step > 1e7) in.fail(path, "grid has more than 1e7 points");
  return arithmetic_grid(start, stop, step);
}

}  // namespace detail

using detail::json;
using detail::JsonReader;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

MapFile parse_map(std::string_view text, std::string_view source) {
  JsonReader in(text, source);
  in.expect_format(kMapFormat);
  const json& root = in.root();
  const long n = in.integer(root, "", "phases");
  if (n < 1 || n > 2000) in.fail("phases", "phase count must lie in 1..2000");
  const auto size = static_cast<std::size_t>(n);
  auto matrix = [&](const char* key) {
    std::vector<double> v = in.numbers(in.field(root, "", key), key);
    if (v.size() != size * size) {
      in.fail(key, "expected " + std::to_string(size * size) + " entries in row-major order");
    }
    return DenseMatrix(size, size, std::move(v));
  };
  DenseMatrix d0 = matrix("d0");
  DenseMatrix d1 = matrix("d1");
  Vector labels(size);
  for (std::size_t i = 0; i < size; ++i) labels[i] = static_cast<double>(i);
  if (const json* l = in.optional(root, "labels")) {
    labels = in.numbers(*l, "labels");
    if (labels.size() != size) in.fail("labels", "expected one label per phase");
  }
  try {
    return {MarkovArrivalProcess(std::move(d0), std::move(d1)), std::move(labels)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::NotIrreducible ||
        e.code() == ErrorCode::SingularMatrix) {
      in.fail("d0", e.what());
    }
    throw;
  }
}

MapFile load_map(const std::filesystem::path& path) { return parse_map(read_text(path), path.string()); }

std::string map_to_json(const MarkovArrivalProcess& map, std::span<const double> labels) {
  json j;
  j["format"] = kMapFormat;
  j["phases"] = map.size();
  j["d0"] = std::vector<double>(map.d0().values().begin(), map.d0().values().end());
  j["d1"] = std::vector<double>(map.d1().values().begin(), map.d1().values().end());
  j["labels"] = std::vector<double>(labels.begin(), labels.end());
  return j.dump(2) + "\n";
}

ServiceSpec parse_service(std::string_view text, std::string_view source) {
  JsonReader in(text, source);
  return detail::read_service(in, in.root(), "");
}

SimulationJob parse_sim_config(std::string_view text, std::string_view source) {
  JsonReader in(text, source);
  in.expect_format(kSimFormat);
  const json& root = in.root();
  SimulationJob job;
  SimConfig& cfg = job.config;

  const json& model = in.field(root, "", "model");
  const std::string type = in.string(model, "model", "type");
  if (type == "mm1k") {
    Mm1kParams p;
    p.arrival_rate = in.number(model, "model", "arrival_rate");
    p.service_rate = in.number(model, "model", "service_rate");
    const long k = in.integer(model, "model", "capacity");
    if (k < 1 || k > 1000000) in.fail("model.capacity", "capacity must lie in 1..1000000");
    p.capacity = static_cast<int>(k);
    cfg.model = p;
  } else if (type == "mg1") {
    Mg1Params p;
    p.arrival_rate = in.number(model, "model", "arrival_rate");
    p.service = detail::read_service(in, in.field(model, "model", "service"), "model.service");
    cfg.model = p;
  } else {
    in.fail("model.type", "unknown model type \"" + type + "\" (expected mm1k or mg1)");
  }

  cfg.initial = stationary_start(cfg.model);
  if (const json* init = in.optional(root, "initial")) {
    std::string kind;
    if (init->is_string()) {
      kind = init->get<std::string>();
    } else {
      kind = in.string(*init, "initial", "type");
    }
    if (kind == "stationary") {
      if (init->is_object() && in.optional(*init, "duration")) {
        cfg.initial = WarmupStart{in.number(*init, "initial", "duration")};
      }
    } else if (kind == "empty") {
      cfg.initial = EmptyStart{};
    } else if (kind == "event_stationary") {
      cfg.initial = EventStationaryStart{};
    } else if (kind == "fixed" && init->is_object()) {
      cfg.initial = FixedStart{static_cast<int>(in.integer(*init, "initial", "level"))};
    } else if (kind == "pmf" && init->is_object()) {
      cfg.initial = PmfStart{in.numbers(in.field(*init, "initial", "pmf"), "initial.pmf")};
    } else if (kind == "warmup") {
      cfg.initial = WarmupStart{init->is_object() ? in.number_or(*init, "initial", "duration", 3e4) : 3e4};
    } else {
      in.fail("initial", "unknown initial condition \"" + kind + "\"");
    }
  }

  cfg.grid = detail::read_grid(in, in.field(root, "", "grid"), "grid");
  const long reps = in.integer(root, "", "replications");
  if (reps < 2 || reps > 0xffffffffL) in.fail("replications", "replications must lie in 2..2^32-1");
  cfg.replications = static_cast<std::uint32_t>(reps);

  if (const json* seed = in.optional(root, "seed")) {
    if (seed->is_number_unsigned()) {
      cfg.master_seed = seed->get<std::uint64_t>();
    } else if (seed->is_string()) {
      const std::string s = seed->get<std::string>();
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), cfg.master_seed);
      if (ec != std::errc() || p != s.data() + s.size()) in.fail("seed", "seed must be a 64-bit unsigned integer");
    } else {
      in.fail("seed", "seed must be a 64-bit unsigned integer");
    }
  }
  const long threads = in.integer_or(root, "", "threads", 0);
  if (threads < 0 || threads > 4096) in.fail("threads", "threads must lie in 0..4096");
  cfg.threads = static_cast<int>(threads);

  if (const json* fit = in.optional(root, "fit")) {
    job.window_fraction = in.number_or(*fit, "fit", "window_fraction", job.window_fraction);
    if (!(job.window_fraction > 0.0 && job.window_fraction <= 1.0)) {
      in.fail("fit.window_fraction", "must lie in (0, 1]");
    }
  }

  try {
    validate(cfg);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) in.fail("model", e.what());
    throw;
  }
  return job;
}

SimulationJob load_sim_config(const std::filesystem::path& path) {
  return parse_sim_config(read_text(path), path.string());
}

std::vector<double> arithmetic_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) {
    throw Error(ErrorCode::InvalidArgument, "grid needs step > 0 and stop >= start");
  }
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  g.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g.push_back(start + static_cast<double>(i) * step);
  return g;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw Error(ErrorCode::InvalidArgument, "CSV row width does not match header");
  }
  rows_.push_back(std::move(cells));
}

void CsvTable::add_numbers(std::initializer_list<double> values) {
  add_numbers(std::vector<double>(values));
}

void CsvTable::add_numbers(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  add_row(std::move(cells));
}

namespace {

void write_cell(std::ostream& os, const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) {
    os << cell;
    return;
  }
  os << '"';
  for (char c : cell) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

void write_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    write_cell(os, cells[i]);
  }
  os << "\r\n";
}

}  // namespace

void CsvTable::write(std::ostream& os) const {
  write_line(os, header_);
  for (const auto& row : rows_) write_line(os, row);
}

std::string CsvTable::str() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace varcurve
