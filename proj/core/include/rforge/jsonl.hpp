#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rforge {

using json = nlohmann::json;

std::vector<json> read_jsonl(const std::filesystem::path& path);
// One compact object per line, keys sorted, trailing newline after each line.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);
void append_jsonl(const std::filesystem::path& path, const json& row);

json read_json_file(const std::filesystem::path& path);
// Pretty-printed, two-space indent, trailing newline.
void write_json_file(const std::filesystem::path& path, const json& value);

std::string read_text_file(const std::filesystem::path& path);
// Writes through a temporary file and renames into place.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace rforge
