#include "sentdiag/json_extract.hpp"

#include "sentdiag/text.hpp"

namespace sentdiag {

using nlohmann::json;

namespace {

// Index one past the bracket closing the one at `start`, or npos.
std::size_t balanced_end(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '{': case '[': ++depth; break;
      case '}': case ']':
        if (--depth == 0) return i + 1;
        break;
      default: break;
    }
  }
  return std::string_view::npos;
}

std::optional<json> try_parse(std::string_view s) {
  auto v = json::parse(s.begin(), s.end(), nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) return std::nullopt;
  return v;
}

// First valid value opened by `opener` at or after `from`; sets `end`.
std::optional<json> first_bracketed(std::string_view s, char opener, std::size_t from, std::size_t& end) {
  for (auto pos = s.find(opener, from); pos != std::string_view::npos; pos = s.find(opener, pos + 1)) {
    const auto e = balanced_end(s, pos);
    if (e == std::string_view::npos) continue;
    if (auto v = try_parse(s.substr(pos, e - pos))) {
      end = e;
      return v;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<json> extract_json(std::string_view text) {
  const auto trimmed = text::trim(text);
  if (trimmed.empty()) return std::nullopt;
  if (auto v = try_parse(trimmed)) return v;
  std::size_t end = 0;
  return first_bracketed(text, '{', 0, end);
}

std::optional<json> extract_json_list(std::string_view text) {
  const auto trimmed = text::trim(text);
  if (trimmed.empty()) return std::nullopt;
  if (auto v = try_parse(trimmed)) return v;
  std::size_t end = 0;
  std::size_t from = 0;
  json objects = json::array();
  while (true) {
    const auto pos = text.find_first_of("{[", from);
    if (pos == std::string_view::npos) break;
    const auto e = balanced_end(text, pos);
    std::optional<json> v;
    if (e != std::string_view::npos) v = try_parse(text.substr(pos, e - pos));
    if (!v) {
      from = pos + 1;
      continue;
    }
    end = e;
    if (v->is_array()) {
      if (objects.empty()) return v;
      break;
    }
    objects.push_back(std::move(*v));
    from = end;
  }
  if (objects.empty()) return std::nullopt;
  return objects;
}

}  // namespace sentdiag
