#pragma once

// Helpers for reading the structured-text config files with field-level
// diagnostics.

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "civsim/core.hpp"

namespace civsim::jsonio {

using json = nlohmann::ordered_json;

// Parses a document; syntax errors report line and column.
json parse_text(std::string_view text, std::string_view origin);
json load_file(const std::filesystem::path& path);
void save_file(const std::filesystem::path& path, const json& doc);
// Stable pretty rendering used for every file the tools write.
std::string dump(const json& doc);

[[noreturn]] void fail(std::string_view field_path, std::string_view message);

const json& require(const json& obj, std::string_view key, std::string_view path);
double require_number(const json& obj, std::string_view key, std::string_view path);
double require_nonnegative(const json& obj, std::string_view key, std::string_view path);
std::string require_string(const json& obj, std::string_view key, std::string_view path);
void require_schema(const json& doc, std::string_view expected, std::string_view origin);

std::string join(std::string_view path, std::string_view key);

}  // namespace civsim::jsonio
