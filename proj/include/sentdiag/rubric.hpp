#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sentdiag/corpus.hpp"
#include "sentdiag/counterfactual.hpp"
#include "sentdiag/hashing.hpp"
#include "sentdiag/provider.hpp"
#include "sentdiag/sentiment_probe.hpp"

namespace sentdiag::rubric {

enum class Kind { explanation, cf_quality };
std::string_view to_string(Kind k);
// "explanation", "cf_quality" or "cfquality".
std::optional<Kind> parse_kind(std::string_view s);

// JSON keys, in scoring order.
const std::array<std::string_view, 4>& dimensions(Kind k);
// Names shown to human raters.
const std::array<std::string_view, 4>& display_names(Kind k);

enum class RaterKind { llm_judge, human };
std::string_view to_string(RaterKind k);

struct Rater {
  RaterKind kind = RaterKind::llm_judge;
  std::string id;  // judge model name or human rater id

  bool operator==(const Rater&) const = default;
};

struct RubricRow {
  std::string item_id;
  Kind kind = Kind::explanation;
  Rater rater;
  std::string model;      // model whose output is being rated
  std::string partition;  // gold, ambiguous, synthetic
  std::array<int, 4> scores{};
  std::optional<std::string> comment;
  bool explanation_over_limit = false;
  std::string exchange_id;

  bool operator==(const RubricRow&) const = default;
};

nlohmann::json to_json(const RubricRow& row);
// Throws ValidationError on anything outside the {0,1}x4 schema.
RubricRow row_from_json(const nlohmann::json& j);

struct Scores {
  std::array<int, 4> values{};
  std::optional<std::string> comment;
};

// Strict: all four keys present, each the integer 0 or 1. The comment
// ("annotator_comment" or "comment") is optional but must be a string.
std::optional<Scores> parse_scores(Kind kind, const nlohmann::json& obj, std::string& reason);
// Same, after pulling the first JSON object out of a free-text reply.
std::optional<Scores> parse_judge_reply(Kind kind, std::string_view reply, std::string& reason);

std::string build_explanation_prompt(const Message& message, const probe::ModelVerdict& verdict);
std::string build_cf_quality_prompt(const forge::CounterfactualRecord& record);

std::string explanation_item_id(std::string_view model, std::string_view message_id);
std::string cf_item_id(std::string_view source_id);

struct JudgeFailure {
  std::string item_id;
  Kind kind = Kind::explanation;
  std::string judge_model;
  int attempts = 0;
  std::string reason;
};
nlohmann::json to_json(const JudgeFailure& f);

struct Judged {
  std::optional<RubricRow> row;
  std::optional<JudgeFailure> failure;
};

// Throws PreconditionError for an uncovered verdict or one without an explanation.
Judged judge_explanation(provider::Gateway& gateway, const provider::ModelHandle& handle, const Message& message,
                         const probe::ModelVerdict& verdict, std::string_view partition);
Judged judge_cf_quality(provider::Gateway& gateway, const provider::ModelHandle& handle,
                        const forge::CounterfactualRecord& record);

struct ExplanationItem {
  Message message;
  probe::ModelVerdict verdict;
  std::string partition;
};

struct Batch {
  std::vector<RubricRow> rows;
  std::vector<JudgeFailure> failures;
};

Batch judge_explanations(provider::Gateway& gateway, const provider::ModelHandle& handle,
                         std::span<const ExplanationItem> items);
Batch judge_cf_records(provider::Gateway& gateway, const provider::ModelHandle& handle,
                       std::span<const forge::CounterfactualRecord> records);

// Seeded uniform sample without replacement, kept in input order.
template <typename T>
std::vector<T> sample(std::span<const T> items, std::size_t k, std::uint64_t seed);

}  // namespace sentdiag::rubric

template <typename T>
std::vector<T> sentdiag::rubric::sample(std::span<const T> items, std::size_t k, std::uint64_t seed) {
  std::vector<T> out;
  for (auto i : sample_indices(items.size(), std::min(k, items.size()), seed)) out.push_back(items[i]);
  return out;
}
