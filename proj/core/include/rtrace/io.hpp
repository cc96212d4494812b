#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rtrace/domain.hpp"

namespace rtrace::io {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers see
/// either the old or the new content.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

/// One JSON document per non-blank line. Missing file reads as empty.
std::vector<json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<json>& records);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);
void append_jsonl(const std::filesystem::path& path, const json& record);

}  // namespace rtrace::io
