#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace blocknas {

const char* tool_version();

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Parses a whole file as one JSON document; ParseError on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Pretty, key-sorted JSON text with a trailing newline.
std::string dump_json(const nlohmann::json& doc);

/// Shortest decimal text that round-trips the double ("%.17g" fallback).
std::string format_double(double value);

/// `value` rendered with 9 significant digits.
std::string format_double9(double value);

}  // namespace blocknas
