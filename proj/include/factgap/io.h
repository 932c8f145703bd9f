#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace factgap {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Calls `fn(record, line_number)` for every non-blank line. Line numbers are
/// 1-based. Throws ValidationError naming the file and line on bad JSON.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

/// One compact JSON document per line, LF-terminated.
std::string to_jsonl(const std::vector<json>& records);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace factgap
