#include "civsim/json_util.hpp"

#include <fstream>
#include <sstream>

namespace civsim::jsonio {

json parse_text(std::string_view text, std::string_view origin) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(ErrorCode::ConfigError, std::string(origin) + ":" + std::to_string(line) + ":" +
                                            std::to_string(column) + ": syntax error");
  }
}

json load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path.string());
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

void save_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  out << dump(doc);
}

void fail(std::string_view field_path, std::string_view message) {
  throw Error(ErrorCode::ConfigError, "field '" + std::string(field_path) + "': " + std::string(message));
}

std::string join(std::string_view path, std::string_view key) {
  if (path.empty()) return std::string(key);
  return std::string(path) + "." + std::string(key);
}

const json& require(const json& obj, std::string_view key, std::string_view path) {
  if (!obj.is_object()) fail(path, "expected an object");
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) fail(join(path, key), "missing");
  return *it;
}

double require_number(const json& obj, std::string_view key, std::string_view path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  return v.get<double>();
}

double require_nonnegative(const json& obj, std::string_view key, std::string_view path) {
  const double v = require_number(obj, key, path);
  if (v < 0.0) fail(join(path, key), "must be >= 0");
  return v;
}

std::string require_string(const json& obj, std::string_view key, std::string_view path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) fail(join(path, key), "expected a string");
  return v.get<std::string>();
}

void require_schema(const json& doc, std::string_view expected, std::string_view origin) {
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, std::string(origin) + ": expected an object");
  const auto it = doc.find("schema");
  if (it == doc.end() || !it->is_string() || it->get<std::string>() != expected)
    fail("schema", "expected \"" + std::string(expected) + "\"");
}

}  // namespace civsim::jsonio
