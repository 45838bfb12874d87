#include "civsim/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace civsim::harness {

using jsonio::json;

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::ConfigError, "report cells must be finite");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  // Keep a marker of floating type so the CSV reads back as a double.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(std::string_view s) {
  if (s.find_first_of("\r\n") != std::string_view::npos)
    throw Error(ErrorCode::ConfigError, "report strings cannot contain line breaks");
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string render_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_double(v);
        else return quote(v);
      },
      c);
}

json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else if constexpr (std::is_same_v<T, double>) {
          if (!std::isfinite(v)) throw Error(ErrorCode::ConfigError, "report cells must be finite");
          return v;
        } else return v;
      },
      c);
}

Cell cell_from_json(const json& j, const std::string& path) {
  if (j.is_null()) return std::monostate{};
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  jsonio::fail(path, "unsupported cell type");
}

// Splits one CSV record; `quoted` marks fields that were quoted.
std::vector<std::pair<std::string, bool>> split_record(std::string_view line, std::size_t lineno) {
  std::vector<std::pair<std::string, bool>> out;
  std::size_t i = 0;
  for (;;) {
    std::string field;
    bool quoted = false;
    if (i < line.size() && line[i] == '"') {
      quoted = true;
      ++i;
      for (;;) {
        if (i >= line.size())
          throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": unterminated quote");
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        field += line[i++];
      }
      if (i < line.size() && line[i] != ',')
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": text after closing quote");
    } else {
      while (i < line.size() && line[i] != ',') field += line[i++];
    }
    out.emplace_back(std::move(field), quoted);
    if (i >= line.size()) break;
    ++i;  // comma
  }
  return out;
}

Cell parse_cell(const std::string& field, bool quoted, std::size_t lineno) {
  if (quoted) return field;
  if (field.empty()) return std::monostate{};
  const char* first = field.data();
  const char* last = first + field.size();
  if (field.find_first_of(".eEn") == std::string::npos) {
    std::int64_t v = 0;
    const auto res = std::from_chars(first, last, v);
    if (res.ec == std::errc{} && res.ptr == last) return v;
  } else {
    double v = 0.0;
    const auto res = std::from_chars(first, last, v);
    if (res.ec == std::errc{} && res.ptr == last) return v;
  }
  throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": bad cell '" + field + "'");
}

}  // namespace

Report::Report(std::string kind_, std::vector<std::string> columns_)
    : kind(std::move(kind_)), columns(std::move(columns_)) {}

void Report::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw Error(ErrorCode::InvalidLength, "row has " + std::to_string(row.size()) + " cells, expected " +
                                              std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

std::size_t Report::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw Error(ErrorCode::ConfigError, "no column '" + std::string(name) + "'");
}

const Cell& Report::at(std::size_t row, std::string_view name) const { return rows.at(row).at(column(name)); }

std::string Report::to_csv() const {
  std::string out;
  out += "# ";
  out += kReportSchema;
  out += " kind=" + kind + "\n";
  out += "# meta: " + meta.dump() + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += quote(columns[i]);
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += render_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string Report::to_json_text() const {
  json doc;
  doc["schema"] = kReportSchema;
  doc["kind"] = kind;
  doc["meta"] = meta;
  doc["columns"] = columns;
  json rows_j = json::array();
  for (const auto& row : rows) {
    json r = json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows_j.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows_j);
  return jsonio::dump(doc);
}

Report Report::from_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos)
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lines.size() + 1) + ": missing final newline");
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.size() < 3) throw Error(ErrorCode::ConfigError, "report is missing its header lines");
  const std::string header = "# " + std::string(kReportSchema) + " kind=";
  if (!lines[0].starts_with(header)) throw Error(ErrorCode::ConfigError, "line 1: not a " + std::string(kReportSchema) + " report");
  Report r;
  r.kind = std::string(lines[0].substr(header.size()));
  constexpr std::string_view meta_prefix = "# meta: ";
  if (!lines[1].starts_with(meta_prefix)) throw Error(ErrorCode::ConfigError, "line 2: expected '# meta: '");
  r.meta = jsonio::parse_text(lines[1].substr(meta_prefix.size()), "report meta");
  for (auto& [name, quoted] : split_record(lines[2], 3)) r.columns.push_back(name);
  for (std::size_t l = 3; l < lines.size(); ++l) {
    auto fields = split_record(lines[l], l + 1);
    if (fields.size() != r.columns.size())
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(l + 1) + ": expected " +
                                              std::to_string(r.columns.size()) + " cells");
    std::vector<Cell> row;
    for (auto& [f, q] : fields) row.push_back(parse_cell(f, q, l + 1));
    r.rows.push_back(std::move(row));
  }
  return r;
}

Report Report::from_json_text(std::string_view text) {
  const auto doc = jsonio::parse_text(text, "report");
  jsonio::require_schema(doc, kReportSchema, "report");
  Report r;
  r.kind = jsonio::require_string(doc, "kind", "");
  r.meta = jsonio::require(doc, "meta", "");
  const auto& cols = jsonio::require(doc, "columns", "");
  if (!cols.is_array()) jsonio::fail("columns", "expected an array");
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (!cols[i].is_string()) jsonio::fail("columns[" + std::to_string(i) + "]", "expected a string");
    r.columns.push_back(cols[i].get<std::string>());
  }
  const auto& rows = jsonio::require(doc, "rows", "");
  if (!rows.is_array()) jsonio::fail("rows", "expected an array");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string path = "rows[" + std::to_string(i) + "]";
    if (!rows[i].is_array() || rows[i].size() != r.columns.size())
      jsonio::fail(path, "expected an array of " + std::to_string(r.columns.size()) + " cells");
    std::vector<Cell> row;
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      row.push_back(cell_from_json(rows[i][k], path + "[" + std::to_string(k) + "]"));
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::vector<std::filesystem::path> Report::save(const std::filesystem::path& path) const {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + p.string());
  };
  const auto ext = path.extension().string();
  if (ext == ".csv") {
    write(path, to_csv());
    return {path};
  }
  if (ext == ".json") {
    write(path, to_json_text());
    return {path};
  }
  auto csv = path;
  csv += ".csv";
  auto js = path;
  js += ".json";
  write(csv, to_csv());
  write(js, to_json_text());
  return {csv, js};
}

double as_double(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (std::holds_alternative<std::monostate>(c)) return std::numeric_limits<double>::quiet_NaN();
  throw Error(ErrorCode::ConfigError, "cell is not numeric");
}

std::int64_t as_int(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  throw Error(ErrorCode::ConfigError, "cell is not an integer");
}

std::string as_string(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  throw Error(ErrorCode::ConfigError, "cell is not a string");
}

}  // namespace civsim::harness
