#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sentdiag/corpus.hpp"
#include "sentdiag/provider.hpp"

namespace sentdiag::probe {

inline constexpr std::size_t kExplanationWordLimit = 200;

struct Exemplar {
  std::string text;
  SentimentLabel sentiment = SentimentLabel::Neutral;
  std::vector<std::string> keywords;
  std::string explanation;
  int confidence = 5;
  bool ambiguous = false;
};

struct ExemplarSet {
  std::string version;
  std::string sha256;  // of the file bytes, stamped into run logs
  std::vector<Exemplar> exemplars;
};

// Throws ConfigError if the file is missing or malformed.
ExemplarSet load_exemplars(const std::filesystem::path& path);

// Shots whose text equals the message under test are skipped.
std::string build_classification_prompt(const Message& message, std::span<const Exemplar> shots);

enum class VerdictFailure {
  none,
  transport_error,
  timeout,
  refusal_or_empty,
  no_json,
  not_an_object,
  invalid_label,
  invalid_confidence,
};
std::string_view to_string(VerdictFailure f);

struct ModelVerdict {
  std::string message_id;
  std::string model;
  std::optional<SentimentLabel> label;
  std::optional<std::vector<std::string>> keywords;
  std::optional<std::string> explanation;
  std::optional<double> confidence;
  bool covered = false;
  VerdictFailure failure = VerdictFailure::none;
  bool explanation_over_limit = false;
  std::string exchange_id;
  provider::ExchangeStatus exchange_status = provider::ExchangeStatus::ok;

  bool operator==(const ModelVerdict&) const = default;
};

nlohmann::json to_json(const ModelVerdict& v);
ModelVerdict verdict_from_json(const nlohmann::json& j);

// Integer or decimal, as a JSON number or a numeric string. Anything else is nullopt.
std::optional<double> coerce_confidence(const nlohmann::json& value);

// Never throws: every failure mode becomes an uncovered verdict.
ModelVerdict parse_verdict(const provider::RawExchange& exchange, std::string_view message_id);

// One verdict per message in input order, fanned out up to the handle's
// in-flight cap.
std::vector<ModelVerdict> classify_set(provider::Gateway& gateway, const provider::ModelHandle& handle,
                                       std::span<const Message> messages, std::span<const Exemplar> shots);

double coverage(std::span<const ModelVerdict> verdicts);

}  // namespace sentdiag::probe
