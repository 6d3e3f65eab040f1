#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sentdiag {

// Model output -> JSON. The whole trimmed text is tried first (so any JSON
// value round-trips); otherwise the first balanced {...} that parses wins,
// which tolerates code fences and prose around the payload. nullopt means no
// usable JSON; callers treat that as a coverage miss, not an error.
std::optional<nlohmann::json> extract_json(std::string_view text);

// Like extract_json but looking for a list: a whole-text value, else the first
// valid [...] array, else every top-level {...} object in order (models often
// emit three bare objects instead of a list).
std::optional<nlohmann::json> extract_json_list(std::string_view text);

}  // namespace sentdiag
