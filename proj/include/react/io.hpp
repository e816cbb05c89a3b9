#pragma once

#include "react/common.hpp"
#include "react/jstp.hpp"
#include "react/minco.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>
#include <string_view>

namespace react::io {

using Json = nlohmann::json;

/// Schema violation; `field` is a dotted path such as "planner.lambda.obs".
class SchemaError : public InvalidArgument {
 public:
  SchemaError(std::string field, const std::string& message);
  std::string field;
};

/// Typed, path-tracking access to one JSON object. Unknown keys are rejected
/// by finish() so typos do not silently fall back to defaults.
class ObjectReader {
 public:
  ObjectReader(const Json& object, std::string path);

  bool has(std::string_view key) const;
  const Json& at(std::string_view key);
  std::string child_path(std::string_view key) const;

  double number(std::string_view key);
  double number_or(std::string_view key, double fallback);
  int integer_or(std::string_view key, int fallback);
  bool boolean_or(std::string_view key, bool fallback);
  std::string string_or(std::string_view key, const std::string& fallback);
  Vec2 vec2(std::string_view key);

  /// Throws SchemaError on keys that were never accessed.
  void finish() const;

  const std::string& path() const { return path_; }

 private:
  const Json& object_;
  std::string path_;
  std::vector<std::string> seen_;
};

Vec2 parse_vec2(const Json& value, const std::string& path);
Json vec2_json(const Vec2& v);

/// {"M": pieces, "T": [durations], "c": [[12 numbers] per piece]}, each piece
/// a 6x2 coefficient matrix in row-major order (row k multiplies t^k).
Json trajectory_to_json(const minco::PiecewiseQuintic& trajectory);
minco::PiecewiseQuintic trajectory_from_json(const Json& value, const std::string& path = "trajectory");

Json planner_config_to_json(const jstp::PlannerConfig& config);
/// Fields absent from `value` keep the values already in `config`.
void read_planner_config(const Json& value, const std::string& path, jstp::PlannerConfig& config);

/// Parses text, reporting syntax errors with line and column.
Json parse_text(const std::string& text, const std::string& source);
Json load_file(const std::string& path);

/// Shortest round-trip representation of a double for text outputs.
std::string format_double(double value);

}  // namespace react::io
