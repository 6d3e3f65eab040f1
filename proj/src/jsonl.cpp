#include "sentdiag/jsonl.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "sentdiag/errors.hpp"
#include "sentdiag/text.hpp"

namespace sentdiag::jsonl {

std::string dump_line(const json& value) {
  return value.dump(-1, ' ', false, json::error_handler_t::replace);
}

json header_json(const Header& header) {
  return json{{"_header", {{"kind", header.kind}, {"manifest_sha256", header.manifest_sha256}}}};
}

bool is_header(const json& value) { return value.is_object() && value.contains("_header"); }

Contents read(std::istream& in) {
  Contents out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (is_header(value)) {
      const auto& h = value["_header"];
      out.header = Header{h.value("kind", ""), h.value("manifest_sha256", "")};
      continue;
    }
    out.records.push_back(std::move(value));
  }
  return out;
}

Contents read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return read(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_file(const std::filesystem::path& path, const Header& header, const std::vector<json>& records) {
  std::ostringstream buf;
  buf << dump_line(header_json(header)) << '\n';
  for (const auto& r : records) buf << dump_line(r) << '\n';
  write_text_file(path, buf.str());
}

}  // namespace sentdiag::jsonl
