#pragma once

// Shared JSON plumbing for the scenario, allocation and config files.
// Writing goes through json_number so that doubles round-trip exactly
// (%.17g) and infinities travel as the strings "inf" / "-inf".

#include <string>

#include "dsmopt/binder.hpp"
#include "dsmopt/errors.hpp"
#include "json.hpp"

namespace dsmopt::jsonio {

using nlohmann::json;

inline std::string json_number(double x) {
  if (std::isfinite(x)) return binder::format_double(x);
  return "\"" + binder::format_double(x) + "\"";
}

inline std::string quoted(const std::string& s) { return json(s).dump(); }

// Parses `text`; syntax errors become ParseError with a 1-based line and column.
inline json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(what + ": malformed JSON", line, col);
  }
}

[[noreturn]] inline void schema_error(const std::string& ctx, const std::string& what) {
  throw ParseError(ctx + ": " + what);
}

inline const json& field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object()) schema_error(ctx, std::string("expected an object holding '") + key + "'");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(ctx, std::string("missing key '") + key + "'");
  return *it;
}

inline double as_number(const json& v, const std::string& ctx) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return binder::kInf;
    if (s == "-inf") return -binder::kInf;
  }
  schema_error(ctx, "expected a number");
}

inline std::string as_string(const json& v, const std::string& ctx) {
  if (!v.is_string()) schema_error(ctx, "expected a string");
  return v.get<std::string>();
}

}  // namespace dsmopt::jsonio
