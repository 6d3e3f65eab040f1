#include "sentdiag/corpus.hpp"

#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "sentdiag/errors.hpp"
#include "sentdiag/jsonl.hpp"
#include "sentdiag/text.hpp"

namespace sentdiag {

using nlohmann::json;

std::string_view to_string(SentimentLabel label) {
  switch (label) {
    case SentimentLabel::Positive: return "Positive";
    case SentimentLabel::Negative: return "Negative";
    case SentimentLabel::Neutral: return "Neutral";
  }
  return "Neutral";
}

std::optional<SentimentLabel> parse_label(std::string_view s) {
  const auto t = text::ascii_lower(text::trim(s));
  if (t == "positive" || t == "1" || t == "+1") return SentimentLabel::Positive;
  if (t == "negative" || t == "-1") return SentimentLabel::Negative;
  if (t == "neutral" || t == "0") return SentimentLabel::Neutral;
  return std::nullopt;
}

std::optional<SentimentLabel> parse_label_value(const json& value) {
  if (value.is_string()) return parse_label(std::string_view(value.get_ref<const std::string&>()));
  if (value.is_number_integer()) {
    switch (value.get<long long>()) {
      case 1: return SentimentLabel::Positive;
      case 0: return SentimentLabel::Neutral;
      case -1: return SentimentLabel::Negative;
      default: return std::nullopt;
    }
  }
  return std::nullopt;
}

SentimentLabel opposite(SentimentLabel label) {
  switch (label) {
    case SentimentLabel::Positive: return SentimentLabel::Negative;
    case SentimentLabel::Negative: return SentimentLabel::Positive;
    case SentimentLabel::Neutral: break;
  }
  throw PreconditionError("Neutral has no opposite sentiment");
}

json to_json(const Message& m) {
  json j{{"id", m.id},
         {"text", m.text},
         {"annotator_labels", {to_string(m.annotator_labels[0]), to_string(m.annotator_labels[1])}}};
  if (m.translation) j["translation"] = *m.translation;
  if (m.language_tags) j["language_tags"] = *m.language_tags;
  if (m.notes) j["notes"] = *m.notes;
  return j;
}

namespace corpus {

namespace {

std::optional<std::vector<std::string>> string_list(const json& rec, const char* field, std::size_t index) {
  if (!rec.contains(field) || rec[field].is_null()) return std::nullopt;
  const auto& v = rec[field];
  if (!v.is_array()) throw IngestError(index, field, "expected a list of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw IngestError(index, field, "expected a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Message message_from_json(const json& rec, std::size_t index) {
  if (!rec.is_object()) throw IngestError(index, "<record>", "expected a JSON object");
  Message m;

  if (!rec.contains("id")) throw IngestError(index, "id", "missing");
  if (rec["id"].is_string()) {
    m.id = rec["id"].get<std::string>();
  } else if (rec["id"].is_number_integer()) {
    m.id = rec["id"].dump();
  } else {
    throw IngestError(index, "id", "expected a string");
  }
  if (m.id.empty()) throw IngestError(index, "id", "empty");

  if (!rec.contains("text") || !rec["text"].is_string()) throw IngestError(index, "text", "missing or not a string");
  m.text = rec["text"].get<std::string>();
  if (text::trim(m.text).empty()) throw IngestError(index, "text", "empty after trimming whitespace");

  if (rec.contains("translation") && !rec["translation"].is_null()) {
    if (!rec["translation"].is_string()) throw IngestError(index, "translation", "expected a string");
    m.translation = rec["translation"].get<std::string>();
  }

  if (!rec.contains("annotator_labels") || !rec["annotator_labels"].is_array()) {
    throw IngestError(index, "annotator_labels", "missing or not a list");
  }
  const auto& labels = rec["annotator_labels"];
  if (labels.size() != 2) {
    throw IngestError(index, "annotator_labels", "expected exactly 2 labels, got " + std::to_string(labels.size()));
  }
  for (std::size_t k = 0; k < 2; ++k) {
    auto l = parse_label_value(labels[k]);
    if (!l) throw IngestError(index, "annotator_labels", "unrecognized label " + labels[k].dump());
    m.annotator_labels[k] = *l;
  }

  m.language_tags = string_list(rec, "language_tags", index);
  m.notes = string_list(rec, "notes", index);
  if (m.notes && m.notes->size() > 2) throw IngestError(index, "notes", "at most one note per annotator");
  return m;
}

}  // namespace

std::vector<Message> ingest_records(std::span<const json> records) {
  std::vector<Message> out;
  out.reserve(records.size());
  std::unordered_set<std::string> seen;
  std::size_t index = 0;
  for (const auto& rec : records) {
    ++index;
    auto m = message_from_json(rec, index);
    if (!seen.insert(m.id).second) {
      throw ConflictError("duplicate message id '" + m.id + "' at record " + std::to_string(index));
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Message> ingest(std::istream& in) {
  std::vector<json> records;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IngestError(index + 1, "<json>", e.what());
    }
    if (jsonl::is_header(rec)) continue;
    ++index;
    records.push_back(std::move(rec));
  }
  return ingest_records(records);
}

std::vector<Message> ingest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus " + path);
  return ingest(in);
}

std::string serialize(std::span<const Message> messages) {
  std::string out;
  for (const auto& m : messages) {
    out += jsonl::dump_line(to_json(m));
    out += '\n';
  }
  return out;
}

Partition partition(std::span<const Message> corpus) {
  Partition p;
  for (const auto& m : corpus) {
    if (!m.agreed()) {
      p.ambiguous.push_back(m);
      continue;
    }
    p.gold.push_back(m);
    if (m.agreed_label() != SentimentLabel::Neutral) p.cf_pool.push_back(m);
  }
  return p;
}

json partition_manifest(const Partition& p) {
  auto ids = [](const std::vector<Message>& v) {
    json a = json::array();
    for (const auto& m : v) a.push_back(m.id);
    return a;
  };
  auto per_class = [](const std::vector<Message>& v) {
    json c = json::object();
    for (auto l : kAllLabels) c[std::string(to_string(l))] = 0;
    for (const auto& m : v) c[std::string(to_string(m.agreed_label()))] = c[std::string(to_string(m.agreed_label()))].get<int>() + 1;
    return c;
  };
  return json{{"counts",
               {{"total", p.gold.size() + p.ambiguous.size()},
                {"gold", p.gold.size()},
                {"ambiguous", p.ambiguous.size()},
                {"cf_pool", p.cf_pool.size()}}},
              {"per_class", {{"gold", per_class(p.gold)}, {"cf_pool", per_class(p.cf_pool)}}},
              {"gold", ids(p.gold)},
              {"ambiguous", ids(p.ambiguous)},
              {"cf_pool", ids(p.cf_pool)}};
}

}  // namespace corpus
}  // namespace sentdiag
