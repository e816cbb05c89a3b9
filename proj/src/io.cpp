#include "react/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace react::io {

SchemaError::SchemaError(std::string f, const std::string& message)
    : InvalidArgument(f + ": " + message), field(std::move(f)) {}

ObjectReader::ObjectReader(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
}

std::string ObjectReader::child_path(std::string_view key) const {
  return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

bool ObjectReader::has(std::string_view key) const { return object_.contains(key); }

const Json& ObjectReader::at(std::string_view key) {
  if (!object_.contains(key)) throw SchemaError(child_path(key), "required field is missing");
  seen_.emplace_back(key);
  return object_.at(std::string(key));
}

double ObjectReader::number(std::string_view key) {
  const Json& v = at(key);
  if (!v.is_number()) throw SchemaError(child_path(key), "expected a number");
  return v.get<double>();
}

double ObjectReader::number_or(std::string_view key, double fallback) {
  return has(key) ? number(key) : fallback;
}

int ObjectReader::integer_or(std::string_view key, int fallback) {
  if (!has(key)) return fallback;
  const Json& v = at(key);
  if (!v.is_number_integer()) throw SchemaError(child_path(key), "expected an integer");
  return v.get<int>();
}

bool ObjectReader::boolean_or(std::string_view key, bool fallback) {
  if (!has(key)) return fallback;
  const Json& v = at(key);
  if (!v.is_boolean()) throw SchemaError(child_path(key), "expected a boolean");
  return v.get<bool>();
}

std::string ObjectReader::string_or(std::string_view key, const std::string& fallback) {
  if (!has(key)) return fallback;
  const Json& v = at(key);
  if (!v.is_string()) throw SchemaError(child_path(key), "expected a string");
  return v.get<std::string>();
}

Vec2 ObjectReader::vec2(std::string_view key) { return parse_vec2(at(key), child_path(key)); }

void ObjectReader::finish() const {
  for (const auto& [key, value] : object_.items()) {
    if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
      throw SchemaError(child_path(key), "unknown field");
    }
  }
}

Vec2 parse_vec2(const Json& value, const std::string& path) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
    throw SchemaError(path, "expected [x, y]");
  }
  const Vec2 v(value[0].get<double>(), value[1].get<double>());
  if (!is_finite(v)) throw SchemaError(path, "non-finite coordinate");
  return v;
}

Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Json trajectory_to_json(const minco::PiecewiseQuintic& trajectory) {
  Json out;
  out["M"] = trajectory.pieces();
  out["T"] = trajectory.durations();
  Json c = Json::array();
  for (const auto& coeffs : trajectory.coefficients()) {
    Json piece = Json::array();
    for (int r = 0; r < 6; ++r) {
      piece.push_back(coeffs(r, 0));
      piece.push_back(coeffs(r, 1));
    }
    c.push_back(std::move(piece));
  }
  out["c"] = std::move(c);
  return out;
}

minco::PiecewiseQuintic trajectory_from_json(const Json& value, const std::string& path) {
  ObjectReader r(value, path);
  const Json& m = r.at("M");
  if (!m.is_number_unsigned()) throw SchemaError(r.child_path("M"), "expected a nonnegative integer");
  const auto pieces = m.get<std::size_t>();
  const Json& t = r.at("T");
  const Json& c = r.at("c");
  if (!t.is_array() || t.size() != pieces) throw SchemaError(r.child_path("T"), "expected M durations");
  if (!c.is_array() || c.size() != pieces) throw SchemaError(r.child_path("c"), "expected M coefficient blocks");
  r.finish();
  std::vector<double> durations;
  std::vector<minco::Coeffs> coefficients;
  for (std::size_t i = 0; i < pieces; ++i) {
    const std::string tp = r.child_path("T") + "[" + std::to_string(i) + "]";
    if (!t[i].is_number()) throw SchemaError(tp, "expected a number");
    durations.push_back(t[i].get<double>());
    const std::string cp = r.child_path("c") + "[" + std::to_string(i) + "]";
    if (!c[i].is_array() || c[i].size() != 12) throw SchemaError(cp, "expected 12 numbers (6x2 row-major)");
    minco::Coeffs coeffs;
    for (int k = 0; k < 12; ++k) {
      if (!c[i][static_cast<std::size_t>(k)].is_number()) throw SchemaError(cp, "expected a number");
      coeffs(k / 2, k % 2) = c[i][static_cast<std::size_t>(k)].get<double>();
    }
    coefficients.push_back(coeffs);
  }
  try {
    return minco::PiecewiseQuintic(std::move(durations), std::move(coefficients));
  } catch (const InvalidArgument& e) {
    throw SchemaError(path, e.what());
  }
}

Json planner_config_to_json(const jstp::PlannerConfig& config) {
  Json lambda;
  for (std::size_t k = 0; k < jstp::kTermCount; ++k) lambda[jstp::term_name(k)] = config.lambda[k];
  Json out;
  out["lambda"] = lambda;
  out["d_thr_obs"] = config.d_thr_obs;
  out["d_thr_wmr"] = config.d_thr_wmr;
  out["b"] = config.b;
  out["a"] = config.a;
  out["v_max"] = config.v_max;
  out["a_max"] = config.a_max;
  out["delta_max"] = config.delta_max;
  out["wheelbase"] = config.wheelbase;
  out["K"] = config.K;
  out["M"] = config.M;
  out["replan_hz"] = config.replan_hz;
  out["nominal_duration"] = config.nominal_duration;
  out["v_ref_ratio"] = config.v_ref_ratio;
  out["boundary_speed_tolerance"] = config.boundary_speed_tolerance;
  out["optimize_time"] = config.optimize_time;
  out["lbfgs"] = {{"memory", config.lbfgs.memory},
                  {"max_iterations", config.lbfgs.max_iterations},
                  {"grad_tolerance", config.lbfgs.grad_tolerance},
                  {"relative_cost_tolerance", config.lbfgs.relative_cost_tolerance},
                  {"max_line_search", config.lbfgs.max_line_search},
                  {"armijo", config.lbfgs.armijo},
                  {"wolfe", config.lbfgs.wolfe}};
  return out;
}

void read_planner_config(const Json& value, const std::string& path, jstp::PlannerConfig& config) {
  ObjectReader r(value, path);
  if (r.has("lambda")) {
    ObjectReader l(r.at("lambda"), r.child_path("lambda"));
    for (std::size_t k = 0; k < jstp::kTermCount; ++k) config.lambda[k] = l.number_or(jstp::term_name(k), config.lambda[k]);
    l.finish();
  }
  config.d_thr_obs = r.number_or("d_thr_obs", config.d_thr_obs);
  config.d_thr_wmr = r.number_or("d_thr_wmr", config.d_thr_wmr);
  config.b = r.number_or("b", config.b);
  config.a = r.number_or("a", config.a);
  config.v_max = r.number_or("v_max", config.v_max);
  config.a_max = r.number_or("a_max", config.a_max);
  config.delta_max = r.number_or("delta_max", config.delta_max);
  config.wheelbase = r.number_or("wheelbase", config.wheelbase);
  config.K = r.integer_or("K", config.K);
  config.M = r.integer_or("M", config.M);
  config.replan_hz = r.number_or("replan_hz", config.replan_hz);
  config.nominal_duration = r.number_or("nominal_duration", config.nominal_duration);
  config.v_ref_ratio = r.number_or("v_ref_ratio", config.v_ref_ratio);
  config.boundary_speed_tolerance = r.number_or("boundary_speed_tolerance", config.boundary_speed_tolerance);
  config.optimize_time = r.boolean_or("optimize_time", config.optimize_time);
  if (r.has("lbfgs")) {
    ObjectReader s(r.at("lbfgs"), r.child_path("lbfgs"));
    auto& ls = config.lbfgs;
    ls.memory = s.integer_or("memory", ls.memory);
    ls.max_iterations = s.integer_or("max_iterations", ls.max_iterations);
    ls.grad_tolerance = s.number_or("grad_tolerance", ls.grad_tolerance);
    ls.relative_cost_tolerance = s.number_or("relative_cost_tolerance", ls.relative_cost_tolerance);
    ls.max_line_search = s.integer_or("max_line_search", ls.max_line_search);
    ls.armijo = s.number_or("armijo", ls.armijo);
    ls.wolfe = s.number_or("wolfe", ls.wolfe);
    s.finish();
  }
  r.finish();
}

Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into line:column for the diagnostic.
    const std::size_t offset = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw SchemaError(source + ":" + std::to_string(line) + ":" + std::to_string(column), "malformed JSON");
  }
}

Json load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path, "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str(), path);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace react::io
