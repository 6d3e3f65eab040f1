#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sentdiag/corpus.hpp"
#include "sentdiag/provider.hpp"

// Sentiment-flipped counterfactuals: three candidates from a generator model,
// one chosen by a filter model, then local checks on the chosen flip.
namespace sentdiag::forge {

enum class Component {
  keywords,
  phrases,
  negation,
  intent_framing,
  tone,
  sentiment_valence,
  emojis_icons,
  code_mixing,
  intensifier,
};

inline constexpr std::array<Component, 9> kAllComponents = {
    Component::keywords,  Component::phrases,           Component::negation,
    Component::intent_framing, Component::tone,         Component::sentiment_valence,
    Component::emojis_icons,   Component::code_mixing,  Component::intensifier};

std::string_view to_string(Component c);

// Canonical names plus the spellings models actually use ("valence",
// "emoji", "key phrases", "Tone / Intent Shift", ...). nullopt means the
// string belongs in a record's quarantine list.
std::optional<Component> parse_component(std::string_view raw);

struct Candidate {
  std::string cf_text;
  std::vector<Component> components_changed;
  std::vector<std::string> quarantined_components;
  std::string flip_explanation;

  bool operator==(const Candidate&) const = default;
};

enum class ValidationFlag { identity, language_drift, length_ratio, no_components };
std::string_view to_string(ValidationFlag f);

struct CounterfactualRecord {
  std::string source_id;
  std::string original_text;
  SentimentLabel original_sentiment = SentimentLabel::Positive;
  SentimentLabel target_sentiment = SentimentLabel::Negative;
  std::array<Candidate, 3> candidates;
  std::size_t selected = 0;
  std::string selection_justification;
  std::optional<SentimentLabel> predicted_sentiment;
  bool selection_mismatch = false;  // selected text matched only approximately
  bool flip_disputed = false;       // filter predicted the original sentiment
  std::vector<ValidationFlag> validation_flags;
  std::string generator_model;
  std::string filter_model;

  const Candidate& selected_candidate() const { return candidates.at(selected); }
  bool operator==(const CounterfactualRecord&) const = default;
};

nlohmann::json to_json(const CounterfactualRecord& r);
CounterfactualRecord record_from_json(const nlohmann::json& j);

// Throws PreconditionError for a Neutral message.
std::string build_generation_prompt(const Message& message, SentimentLabel agreed);
std::string build_selection_prompt(std::string_view original, SentimentLabel original_sentiment,
                                   std::span<const Candidate> candidates);

struct GenerationResult {
  std::optional<std::array<Candidate, 3>> candidates;
  int attempts = 0;
  std::string failure_reason;
};

// Parses a generator reply; nullopt + reason when it is not exactly three
// usable candidates.
std::optional<std::array<Candidate, 3>> parse_candidates(std::string_view reply, std::string_view original,
                                                         std::string& reason);

// One retry on a malformed or wrong-sized reply, then a recorded failure.
GenerationResult generate_candidates(provider::Gateway& gateway, const provider::ModelHandle& handle,
                                     const Message& message, SentimentLabel agreed);

// Fuzzy tolerance for matching the filter's echoed text to a candidate.
inline constexpr double kSelectionEditTolerance = 0.2;

struct SelectionMatch {
  std::size_t index = 0;
  bool mismatch = false;
  std::size_t distance = 0;
};

// Exact text first, otherwise the nearest candidate by edit distance if that
// distance is within 20% of the candidate's length. Ties go to the lower index.
std::optional<SelectionMatch> match_selection(std::string_view selected, std::span<const Candidate> candidates);

struct Selection {
  SelectionMatch match;
  std::string justification;
  std::optional<SentimentLabel> predicted_sentiment;
};

struct SelectionResult {
  std::optional<Selection> selection;
  std::string failure_reason;
};

// Throws PreconditionError unless exactly three candidates are given.
SelectionResult select_candidate(provider::Gateway& gateway, const provider::ModelHandle& handle,
                                 std::string_view original, SentimentLabel original_sentiment,
                                 std::span<const Candidate> candidates);

inline constexpr double kMinLengthRatio = 0.3;
inline constexpr double kMaxLengthRatio = 3.0;
inline constexpr double kDriftSurvivalThreshold = 0.3;

// Advisory wholesale-translation check: fewer than 30% of the original's
// non-English word tokens survive into the flip.
bool language_drift(std::string_view original, std::string_view flip);

// Local checks only, no model call.
std::vector<ValidationFlag> validate_flip(const CounterfactualRecord& record);

enum class SkipStage { generation, selection };
std::string_view to_string(SkipStage s);

struct Skip {
  std::string source_id;
  SkipStage stage = SkipStage::generation;
  std::string reason;
  bool operator==(const Skip&) const = default;
};
nlohmann::json to_json(const Skip& s);
Skip skip_from_json(const nlohmann::json& j);

struct ForgeResult {
  std::vector<CounterfactualRecord> records;
  std::vector<Skip> skips;

  std::size_t generation_failed() const;
  std::size_t selection_failed() const;
  std::size_t completed() const { return records.size(); }
};

ForgeResult forge(provider::Gateway& gateway, const provider::ModelHandle& generator,
                  const provider::ModelHandle& filter, std::span<const Message> cf_pool);

// Counts over the selected candidate of each record. Quarantined strings are
// keyed "unknown:<raw>", and a candidate with no components counts once under
// "unspecified".
std::map<std::string, std::size_t> component_histogram(std::span<const CounterfactualRecord> records);

// Each completed flip as a Message labelled with its target sentiment.
std::vector<Message> synthetic_corpus(std::span<const CounterfactualRecord> records);
std::string synthetic_id(std::string_view source_id);

}  // namespace sentdiag::forge
