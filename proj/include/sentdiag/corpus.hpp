#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sentdiag {

enum class SentimentLabel { Negative = -1, Neutral = 0, Positive = 1 };

inline constexpr std::array<SentimentLabel, 3> kAllLabels = {
    SentimentLabel::Positive, SentimentLabel::Negative, SentimentLabel::Neutral};

std::string_view to_string(SentimentLabel label);
inline int numeric_code(SentimentLabel label) { return static_cast<int>(label); }

// Accepts names in any case and the numeric codes -1/0/1; nothing else.
std::optional<SentimentLabel> parse_label(std::string_view s);
std::optional<SentimentLabel> parse_label_value(const nlohmann::json& value);

// Positive <-> Negative. Throws PreconditionError for Neutral.
SentimentLabel opposite(SentimentLabel label);

struct Message {
  std::string id;
  std::string text;
  std::optional<std::string> translation;
  std::array<SentimentLabel, 2> annotator_labels{};
  std::optional<std::vector<std::string>> language_tags;
  std::optional<std::vector<std::string>> notes;

  bool agreed() const { return annotator_labels[0] == annotator_labels[1]; }
  // Meaningful only for agreed messages.
  SentimentLabel agreed_label() const { return annotator_labels[0]; }

  bool operator==(const Message&) const = default;
};

nlohmann::json to_json(const Message& m);

namespace corpus {

// One JSON object per line. Blank lines and "_header" lines are skipped.
// Throws IngestError (1-based record index + field) or ConflictError on a
// duplicate id. Text bytes are never altered.
std::vector<Message> ingest(std::istream& in);
std::vector<Message> ingest_records(std::span<const nlohmann::json> records);
std::vector<Message> ingest_file(const std::string& path);

std::string serialize(std::span<const Message> messages);

struct Partition {
  std::vector<Message> gold;
  std::vector<Message> ambiguous;
  std::vector<Message> cf_pool;  // agreed and non-Neutral, subset of gold
};

Partition partition(std::span<const Message> corpus);

// Membership by id plus counts (per-class counts for gold and cf_pool only).
nlohmann::json partition_manifest(const Partition& p);

}  // namespace corpus
}  // namespace sentdiag
