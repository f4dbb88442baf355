#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace memprobe::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);

/// Writes to a sibling temp file and renames it over `path`, creating parent
/// directories as needed. Readers never observe a partially written file.
void write_file_atomic(const fs::path& path, std::string_view content);

/// Parses a JSONL file. Blank lines are skipped; a malformed line raises
/// ParseError naming its 1-based line number.
std::vector<nlohmann::json> read_jsonl(const fs::path& path);

/// Like read_jsonl but stops at the first malformed line instead of throwing.
/// Used when resuming after an interrupted append.
std::vector<nlohmann::json> read_jsonl_prefix(const fs::path& path);

std::string to_jsonl(const std::vector<nlohmann::json>& records);

/// Appends one JSON line and flushes.
void append_jsonl(const fs::path& path, const nlohmann::json& record);

}  // namespace memprobe::io
