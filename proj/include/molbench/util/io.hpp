#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace molbench::util {

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view data);

/// One JSON value per non-empty line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

/// Compact JSON with sorted keys (nlohmann objects are key-ordered).
inline std::string dump_compact(const nlohmann::json& j) { return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace); }

}  // namespace molbench::util
