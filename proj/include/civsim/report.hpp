#pragma once

// Tabular command output in two renderings: CSV with a commented metadata
// header, and a JSON document. Both parse back and re-emit byte-identically.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "civsim/json_util.hpp"

namespace civsim::harness {

inline constexpr std::string_view kReportSchema = "civsim.report/1";

using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

struct Report {
  std::string kind;  // the command that produced it
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  jsonio::json meta = jsonio::json::object();

  Report() = default;
  Report(std::string kind, std::vector<std::string> columns);

  // Throws InvalidLength when the row width differs from the column count.
  void add_row(std::vector<Cell> row);
  std::size_t column(std::string_view name) const;
  const Cell& at(std::size_t row, std::string_view column) const;

  std::string to_csv() const;
  std::string to_json_text() const;
  static Report from_csv(std::string_view text);
  static Report from_json_text(std::string_view text);

  // ".csv" or ".json" selects the format; without an extension both
  // "<path>.csv" and "<path>.json" are written. Returns the files written.
  std::vector<std::filesystem::path> save(const std::filesystem::path& path) const;

  friend bool operator==(const Report&, const Report&) = default;
};

double as_double(const Cell& c);  // null reads as NaN
std::int64_t as_int(const Cell& c);
std::string as_string(const Cell& c);

}  // namespace civsim::harness
