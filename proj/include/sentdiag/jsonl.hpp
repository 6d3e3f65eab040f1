#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

// Line-delimited JSON files. Every file written by the harness starts with a
// header line {"_header": {"kind": ..., "manifest_sha256": ...}} so each
// artifact can be traced back to the run manifest that produced it.
namespace sentdiag::jsonl {

using nlohmann::json;

struct Header {
  std::string kind;
  std::string manifest_sha256;
};

std::string dump_line(const json& value);
json header_json(const Header& header);
bool is_header(const json& value);

struct Contents {
  std::optional<Header> header;
  std::vector<json> records;
};

// Parses every non-blank line; throws sentdiag::Error naming the line on bad JSON.
Contents read(std::istream& in);
Contents read_file(const std::filesystem::path& path);

// Writes header + records to a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, const Header& header, const std::vector<json>& records);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace sentdiag::jsonl
