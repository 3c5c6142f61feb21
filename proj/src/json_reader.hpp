#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "varcurve/mg1.hpp"

namespace varcurve::detail {

using nlohmann::json;

// Reads typed fields out of a parsed document and reports problems as
// "source:line: path: message". Lines are located by the first occurrence of
// the offending key, which is exact for the flat schemas used here.
class JsonReader {
 public:
  JsonReader(std::string_view text, std::string_view source);

  const json& root() const { return root_; }

  [[noreturn]] void fail(const std::string& path, const std::string& message) const;

  const json& field(const json& obj, const std::string& path, const char* key) const;
  const json* optional(const json& obj, const char* key) const;

  double number(const json& obj, const std::string& path, const char* key) const;
  double number_or(const json& obj, const std::string& path, const char* key, double fallback) const;
  long integer(const json& obj, const std::string& path, const char* key) const;
  long integer_or(const json& obj, const std::string& path, const char* key, long fallback) const;
  std::string string(const json& obj, const std::string& path, const char* key) const;
  std::vector<double> numbers(const json& value, const std::string& path) const;

  void expect_format(std::string_view tag) const;

 private:
  std::string_view text_;
  std::string source_;
  json root_;
};

ServiceSpec read_service(const JsonReader& in, const json& value, const std::string& path);
/// Either an explicit array or {"start", "stop", "step"}.
std::vector<double> read_grid(const JsonReader& in, const json& value, const std::string& path);

}  // namespace varcurve::detail
