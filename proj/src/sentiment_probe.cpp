#include "sentdiag/sentiment_probe.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <regex>

#include <spdlog/spdlog.h>

#include "sentdiag/errors.hpp"
#include "sentdiag/hashing.hpp"
#include "sentdiag/json_extract.hpp"
#include "sentdiag/parallel.hpp"
#include "sentdiag/text.hpp"

namespace sentdiag::probe {

using nlohmann::json;
using provider::ExchangeStatus;

namespace {

constexpr std::string_view kPreamble =
    "You are an NLP assistant for sentiment analysis.\n"
    "Given a WhatsApp message (QUERY), classify its sentiment as Positive, Negative, or Neutral.\n"
    "Provide a justification using extracted keywords and a brief explanation.\n"
    "Return your confidence score (0–5). Use JSON output format only.\n";

constexpr std::string_view kDefinitions =
    "Sentiment definitions:\n"
    "- Positive: the message expresses joy, support, pride, or optimism.\n"
    "- Neutral: the message conveys information, routine conversation, or general greetings without strong "
    "sentiment.\n"
    "- Negative: the message expresses frustration, sadness, criticism, or distress.\n";

constexpr std::string_view kOutputFormat =
    "Output Format:\n"
    "{\n"
    "  \"justification\": {\n"
    "    \"keywords\": [ ... ],\n"
    "    \"explanation\": \"...\" },\n"
    "  \"sentiment\": \"...\",\n"
    "  \"confidence_score\": \"...\"\n"
    "}\n";

std::optional<SentimentLabel> parse_label_name(const json& v) {
  if (!v.is_string()) return std::nullopt;
  const auto s = text::ascii_lower(text::trim(v.get<std::string>()));
  if (s == "positive") return SentimentLabel::Positive;
  if (s == "negative") return SentimentLabel::Negative;
  if (s == "neutral") return SentimentLabel::Neutral;
  return std::nullopt;
}

ModelVerdict uncovered(ModelVerdict v, VerdictFailure why) {
  v.covered = false;
  v.failure = why;
  v.label.reset();
  v.keywords.reset();
  v.explanation.reset();
  v.confidence.reset();
  v.explanation_over_limit = false;
  return v;
}

}  // namespace

std::string_view to_string(VerdictFailure f) {
  switch (f) {
    case VerdictFailure::none: return "none";
    case VerdictFailure::transport_error: return "transport_error";
    case VerdictFailure::timeout: return "timeout";
    case VerdictFailure::refusal_or_empty: return "refusal_or_empty";
    case VerdictFailure::no_json: return "no_json";
    case VerdictFailure::not_an_object: return "not_an_object";
    case VerdictFailure::invalid_label: return "invalid_label";
    case VerdictFailure::invalid_confidence: return "invalid_confidence";
  }
  return "none";
}

namespace {

VerdictFailure failure_from_string(std::string_view s) {
  for (auto f : {VerdictFailure::none, VerdictFailure::transport_error, VerdictFailure::timeout,
                 VerdictFailure::refusal_or_empty, VerdictFailure::no_json, VerdictFailure::not_an_object,
                 VerdictFailure::invalid_label, VerdictFailure::invalid_confidence}) {
    if (to_string(f) == s) return f;
  }
  throw Error("unknown verdict failure '" + std::string(s) + "'");
}

}  // namespace

ExemplarSet load_exemplars(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("exemplar file not found: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("exemplars") || !j["exemplars"].is_array()) {
    throw ConfigError("exemplar file is malformed: " + path.string());
  }
  ExemplarSet set;
  set.version = j.value("version", "");
  set.sha256 = sha256_hex(bytes);
  for (const auto& e : j["exemplars"]) {
    Exemplar x;
    x.text = e.value("text", "");
    auto label = parse_label_value(e.value("sentiment", json()));
    if (x.text.empty() || !label) throw ConfigError("exemplar needs text and sentiment: " + e.dump());
    x.sentiment = *label;
    x.keywords = e.value("keywords", std::vector<std::string>{});
    x.explanation = e.value("explanation", "");
    x.confidence = e.value("confidence", 5);
    x.ambiguous = e.value("ambiguous", false);
    set.exemplars.push_back(std::move(x));
  }
  return set;
}

std::string build_classification_prompt(const Message& message, std::span<const Exemplar> shots) {
  std::string p;
  p += kPreamble;
  p += '\n';
  p += kDefinitions;
  bool header = false;
  for (const auto& shot : shots) {
    if (shot.text == message.text) continue;
    if (!header) {
      p += "\nExamples:\n";
      header = true;
    }
    json out{{"justification", {{"keywords", shot.keywords}, {"explanation", shot.explanation}}},
             {"sentiment", to_string(shot.sentiment)},
             {"confidence_score", std::to_string(shot.confidence)}};
    p += "MESSAGE: " + text::quote(shot.text) + "\n";
    if (shot.ambiguous) p += "NOTE: ambiguous; annotators read this message differently.\n";
    p += "OUTPUT: " + out.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  }
  p += "\nQUERY: " + text::quote(message.text) + "\n\n";
  p += kOutputFormat;
  return p;
}

std::optional<double> coerce_confidence(const json& value) {
  if (value.is_number()) {
    const double d = value.get<double>();
    return std::isfinite(d) ? std::optional<double>(d) : std::nullopt;
  }
  if (!value.is_string()) return std::nullopt;
  static const std::regex kNumeric(R"(^\s*[+-]?(\d+(\.\d*)?|\.\d+)\s*$)");
  const auto s = value.get<std::string>();
  if (!std::regex_match(s, kNumeric)) return std::nullopt;
  return std::stod(s);
}

ModelVerdict parse_verdict(const provider::RawExchange& exchange, std::string_view message_id) {
  ModelVerdict v;
  v.message_id = std::string(message_id);
  v.model = exchange.model;
  v.exchange_id = exchange.exchange_id;
  v.exchange_status = exchange.status;

  switch (exchange.status) {
    case ExchangeStatus::ok: break;
    case ExchangeStatus::transport_error: return uncovered(v, VerdictFailure::transport_error);
    case ExchangeStatus::timeout: return uncovered(v, VerdictFailure::timeout);
    case ExchangeStatus::refusal_or_empty: return uncovered(v, VerdictFailure::refusal_or_empty);
  }
  if (!exchange.response_text) return uncovered(v, VerdictFailure::refusal_or_empty);

  const auto parsed = extract_json(*exchange.response_text);
  if (!parsed) return uncovered(v, VerdictFailure::no_json);
  if (!parsed->is_object()) return uncovered(v, VerdictFailure::not_an_object);
  const auto& obj = *parsed;

  auto label = obj.contains("sentiment") ? parse_label_name(obj["sentiment"]) : std::nullopt;
  if (!label) return uncovered(v, VerdictFailure::invalid_label);
  v.label = label;

  if (obj.contains("confidence_score") && !obj["confidence_score"].is_null()) {
    auto c = coerce_confidence(obj["confidence_score"]);
    if (!c || *c < 0.0 || *c > 5.0) return uncovered(v, VerdictFailure::invalid_confidence);
    v.confidence = c;
  }

  if (obj.contains("justification") && obj["justification"].is_object()) {
    const auto& just = obj["justification"];
    if (just.contains("keywords") && just["keywords"].is_array()) {
      std::vector<std::string> kw;
      for (const auto& k : just["keywords"]) {
        if (k.is_string()) kw.push_back(k.get<std::string>());
      }
      v.keywords = std::move(kw);
    }
    if (just.contains("explanation") && just["explanation"].is_string()) {
      v.explanation = just["explanation"].get<std::string>();
      v.explanation_over_limit = text::word_count(*v.explanation) > kExplanationWordLimit;
    }
  }
  v.covered = true;
  v.failure = VerdictFailure::none;
  return v;
}

std::vector<ModelVerdict> classify_set(provider::Gateway& gateway, const provider::ModelHandle& handle,
                                       std::span<const Message> messages, std::span<const Exemplar> shots) {
  if (shots.empty()) {
    spdlog::warn("classify_set({}): no exemplars, running zero-shot", handle.name);
  }
  gateway.set_context("zero_shot", shots.empty());
  std::vector<ModelVerdict> out(messages.size());
  parallel_for(messages.size(), handle.pacing.max_in_flight, [&](std::size_t i) {
    const auto prompt = build_classification_prompt(messages[i], shots);
    out[i] = parse_verdict(gateway.complete(handle, prompt), messages[i].id);
  });
  return out;
}

double coverage(std::span<const ModelVerdict> verdicts) {
  if (verdicts.empty()) return 0.0;
  std::size_t covered = 0;
  for (const auto& v : verdicts) covered += v.covered ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(verdicts.size());
}

json to_json(const ModelVerdict& v) {
  json j{{"message_id", v.message_id},
         {"model", v.model},
         {"covered", v.covered},
         {"failure", to_string(v.failure)},
         {"exchange_id", v.exchange_id},
         {"exchange_status", provider::to_string(v.exchange_status)}};
  if (v.label) j["label"] = to_string(*v.label);
  if (v.keywords) j["keywords"] = *v.keywords;
  if (v.explanation) j["explanation"] = *v.explanation;
  if (v.confidence) j["confidence"] = *v.confidence;
  if (v.explanation_over_limit) j["explanation_over_limit"] = true;
  return j;
}

ModelVerdict verdict_from_json(const json& j) {
  ModelVerdict v;
  v.message_id = j.at("message_id").get<std::string>();
  v.model = j.at("model").get<std::string>();
  v.covered = j.at("covered").get<bool>();
  v.failure = failure_from_string(j.value("failure", "none"));
  v.exchange_id = j.value("exchange_id", "");
  v.exchange_status = provider::status_from_string(j.value("exchange_status", "ok"));
  if (j.contains("label")) {
    v.label = parse_label_value(j["label"]);
    if (!v.label) throw Error("verdict " + v.message_id + ": bad label");
  }
  if (j.contains("keywords")) v.keywords = j["keywords"].get<std::vector<std::string>>();
  if (j.contains("explanation")) v.explanation = j["explanation"].get<std::string>();
  if (j.contains("confidence")) v.confidence = j["confidence"].get<double>();
  v.explanation_over_limit = j.value("explanation_over_limit", false);
  if (v.covered != v.label.has_value()) throw Error("verdict " + v.message_id + ": covered flag disagrees with label");
  return v;
}

}  // namespace sentdiag::probe
