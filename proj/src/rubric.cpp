#include "sentdiag/rubric.hpp"

#include "sentdiag/errors.hpp"
#include "sentdiag/json_extract.hpp"
#include "sentdiag/parallel.hpp"
#include "sentdiag/text.hpp"

namespace sentdiag::rubric {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kExplanationDims = {"faithfulness", "contextual_appropriateness",
                                                              "logical_coherence", "clarity_and_completeness"};
constexpr std::array<std::string_view, 4> kCfDims = {"fluency", "naturalness", "sentiment_flip_clarity",
                                                     "meaning_preservation"};
constexpr std::array<std::string_view, 4> kExplanationNames = {"Faithfulness", "Contextual Appropriateness",
                                                               "Logical Coherence", "Clarity and Completeness"};
constexpr std::array<std::string_view, 4> kCfNames = {"Fluency", "Naturalness", "Sentiment Flip Clarity",
                                                      "Meaning Preservation"};

std::optional<int> strict_binary(const json& v) {
  if (!v.is_number_integer()) return std::nullopt;
  const auto n = v.get<long long>();
  if (n != 0 && n != 1) return std::nullopt;
  return static_cast<int>(n);
}

std::string transformation_text(const forge::Candidate& c) {
  std::string out;
  for (auto comp : c.components_changed) {
    if (!out.empty()) out += ", ";
    out += forge::to_string(comp);
  }
  for (const auto& q : c.quarantined_components) {
    if (!out.empty()) out += ", ";
    out += q;
  }
  return out.empty() ? "unspecified" : out;
}

Judged run_judge(provider::Gateway& gateway, const provider::ModelHandle& handle, Kind kind,
                 const std::string& prompt, RubricRow row) {
  std::string reason;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    const auto ex = gateway.complete(handle, prompt);
    row.exchange_id = ex.exchange_id;
    if (ex.status != provider::ExchangeStatus::ok || !ex.response_text) {
      reason = "judge exchange " + std::string(provider::to_string(ex.status));
      continue;
    }
    if (auto scores = parse_judge_reply(kind, *ex.response_text, reason)) {
      row.scores = scores->values;
      row.comment = scores->comment;
      return Judged{std::move(row), std::nullopt};
    }
  }
  return Judged{std::nullopt, JudgeFailure{row.item_id, kind, handle.name, 2, reason}};
}

}  // namespace

std::string_view to_string(Kind k) { return k == Kind::explanation ? "explanation" : "cf_quality"; }

std::optional<Kind> parse_kind(std::string_view s) {
  if (s == "explanation") return Kind::explanation;
  if (s == "cf_quality" || s == "cfquality") return Kind::cf_quality;
  return std::nullopt;
}

const std::array<std::string_view, 4>& dimensions(Kind k) {
  return k == Kind::explanation ? kExplanationDims : kCfDims;
}

const std::array<std::string_view, 4>& display_names(Kind k) {
  return k == Kind::explanation ? kExplanationNames : kCfNames;
}

std::string_view to_string(RaterKind k) { return k == RaterKind::llm_judge ? "llm_judge" : "human"; }

std::optional<Scores> parse_scores(Kind kind, const json& obj, std::string& reason) {
  if (!obj.is_object()) {
    reason = "rubric is not a JSON object";
    return std::nullopt;
  }
  Scores out;
  const auto& dims = dimensions(kind);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const std::string key(dims[i]);
    if (!obj.contains(key)) {
      reason = "missing " + key;
      return std::nullopt;
    }
    auto v = strict_binary(obj[key]);
    if (!v) {
      reason = key + " must be 0 or 1, got " + obj[key].dump();
      return std::nullopt;
    }
    out.values[i] = *v;
  }
  for (const char* key : {"annotator_comment", "comment"}) {
    if (!obj.contains(key) || obj[key].is_null()) continue;
    if (!obj[key].is_string()) {
      reason = std::string(key) + " must be a string";
      return std::nullopt;
    }
    auto c = obj[key].get<std::string>();
    if (!text::trim(c).empty()) out.comment = std::move(c);
    break;
  }
  return out;
}

std::optional<Scores> parse_judge_reply(Kind kind, std::string_view reply, std::string& reason) {
  const auto parsed = extract_json(reply);
  if (!parsed) {
    reason = "no JSON in judge reply";
    return std::nullopt;
  }
  return parse_scores(kind, *parsed, reason);
}

json to_json(const RubricRow& row) {
  json j{{"item_id", row.item_id},
         {"kind", to_string(row.kind)},
         {"rater", {{"kind", to_string(row.rater.kind)}, {"id", row.rater.id}}},
         {"model", row.model},
         {"partition", row.partition}};
  const auto& dims = dimensions(row.kind);
  for (std::size_t i = 0; i < dims.size(); ++i) j[std::string(dims[i])] = row.scores[i];
  j["comment"] = row.comment ? json(*row.comment) : json(nullptr);
  j["explanation_over_limit"] = row.explanation_over_limit;
  j["exchange_id"] = row.exchange_id;
  return j;
}

RubricRow row_from_json(const json& j) {
  try {
    RubricRow row;
    row.item_id = j.at("item_id").get<std::string>();
    auto kind = parse_kind(j.at("kind").get<std::string>());
    if (!kind) throw ValidationError("unknown rubric kind " + j["kind"].dump());
    row.kind = *kind;
    const auto& rater = j.at("rater");
    const auto rk = rater.at("kind").get<std::string>();
    if (rk == "llm_judge") {
      row.rater.kind = RaterKind::llm_judge;
    } else if (rk == "human") {
      row.rater.kind = RaterKind::human;
    } else {
      throw ValidationError("unknown rater kind '" + rk + "'");
    }
    row.rater.id = rater.at("id").get<std::string>();
    if (row.rater.id.empty()) throw ValidationError("rubric row without a rater id");
    row.model = j.value("model", "");
    row.partition = j.value("partition", "");
    std::string reason;
    auto scores = parse_scores(row.kind, j, reason);
    if (!scores) throw ValidationError("rubric row " + row.item_id + ": " + reason);
    row.scores = scores->values;
    row.comment = scores->comment;
    row.explanation_over_limit = j.value("explanation_over_limit", false);
    row.exchange_id = j.value("exchange_id", "");
    return row;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed rubric row: ") + e.what());
  }
}

json to_json(const JudgeFailure& f) {
  return json{{"item_id", f.item_id},
              {"kind", to_string(f.kind)},
              {"judge_model", f.judge_model},
              {"attempts", f.attempts},
              {"reason", f.reason}};
}

std::string build_explanation_prompt(const Message& message, const probe::ModelVerdict& verdict) {
  if (!verdict.covered || !verdict.label || !verdict.explanation) {
    throw PreconditionError("verdict for " + verdict.message_id + " has no explanation to judge");
  }
  std::string p;
  p += "You are a language model tasked with evaluating the quality of a sentiment explanation.\n";
  p += "Evaluate the explanation for the following:\n";
  p += "1. Faithfulness – Does it reflect the original message and prediction without hallucinating?\n";
  p += "2. Contextual Appropriateness – Is it culturally and linguistically aware?\n";
  p += "3. Logical Coherence – Is it internally consistent and justified?\n";
  p += "4. Clarity and Completeness – Is it clear, specific, and sufficient?\n\n";
  p += "Message:\n" + text::quote(message.text) + "\n";
  p += "Predicted Sentiment: " + std::string(to_string(*verdict.label)) + "\n";
  p += "Explanation: " + text::quote(*verdict.explanation) + "\n\n";
  p += "Return ONLY this JSON:\n";
  p += "{\n  \"faithfulness\": 0 or 1,\n  \"contextual_appropriateness\": 0 or 1,\n  \"logical_coherence\": 0 or 1,\n"
       "  \"clarity_and_completeness\": 0 or 1,\n  \"annotator_comment\": \"optional comment (string)\"\n}\n";
  return p;
}

std::string build_cf_quality_prompt(const forge::CounterfactualRecord& record) {
  const auto& flip = record.selected_candidate();
  const std::string generator = record.generator_model.empty() ? "model" : record.generator_model;
  std::string p;
  p += "You are evaluating a synthetic (" + generator + "-generated) version of a WhatsApp message.\n";
  p += "The synthetic message is a sentiment-flipped version of the original.\n\n";
  p += "Assess the quality of the synthetic message along four criteria using 0 or 1:\n";
  p += "1. Fluency — Is the synthetic message grammatically correct and readable?\n";
  p += "2. Naturalness — Does it sound plausible for a human to write?\n";
  p += "3. Sentiment Flip Clarity — Is the sentiment clearly flipped from the original?\n";
  p += "4. Meaning Preservation — Is the core meaning preserved aside from the sentiment?\n\n";
  p += "Original Message: " + text::quote(record.original_text) + "\n";
  p += "Synthetic Message: " + text::quote(flip.cf_text) + "\n";
  p += "Transformation Type: " + transformation_text(flip) + "\n";
  p += generator + " Explanation for the Flip: " + text::quote(flip.flip_explanation) + "\n\n";
  p += "Return ONLY this JSON:\n";
  p += "{\n  \"fluency\": 0 or 1,\n  \"naturalness\": 0 or 1,\n  \"sentiment_flip_clarity\": 0 or 1,\n"
       "  \"meaning_preservation\": 0 or 1,\n  \"annotator_comment\": \"optional comment (string)\"\n}\n";
  return p;
}

std::string explanation_item_id(std::string_view model, std::string_view message_id) {
  return "exp:" + std::string(model) + ":" + std::string(message_id);
}

std::string cf_item_id(std::string_view source_id) { return "cf:" + std::string(source_id); }

Judged judge_explanation(provider::Gateway& gateway, const provider::ModelHandle& handle, const Message& message,
                         const probe::ModelVerdict& verdict, std::string_view partition) {
  const auto prompt = build_explanation_prompt(message, verdict);
  RubricRow row;
  row.item_id = explanation_item_id(verdict.model, verdict.message_id);
  row.kind = Kind::explanation;
  row.rater = Rater{RaterKind::llm_judge, handle.name};
  row.model = verdict.model;
  row.partition = std::string(partition);
  row.explanation_over_limit = verdict.explanation_over_limit;
  return run_judge(gateway, handle, Kind::explanation, prompt, std::move(row));
}

Judged judge_cf_quality(provider::Gateway& gateway, const provider::ModelHandle& handle,
                        const forge::CounterfactualRecord& record) {
  const auto prompt = build_cf_quality_prompt(record);
  RubricRow row;
  row.item_id = cf_item_id(record.source_id);
  row.kind = Kind::cf_quality;
  row.rater = Rater{RaterKind::llm_judge, handle.name};
  row.model = record.generator_model;
  row.partition = "synthetic";
  return run_judge(gateway, handle, Kind::cf_quality, prompt, std::move(row));
}

namespace {

Batch collect(std::vector<Judged>& judged) {
  Batch out;
  for (auto& j : judged) {
    if (j.row) out.rows.push_back(std::move(*j.row));
    if (j.failure) out.failures.push_back(std::move(*j.failure));
  }
  return out;
}

}  // namespace

Batch judge_explanations(provider::Gateway& gateway, const provider::ModelHandle& handle,
                         std::span<const ExplanationItem> items) {
  std::vector<Judged> judged(items.size());
  parallel_for(items.size(), handle.pacing.max_in_flight, [&](std::size_t i) {
    judged[i] = judge_explanation(gateway, handle, items[i].message, items[i].verdict, items[i].partition);
  });
  return collect(judged);
}

Batch judge_cf_records(provider::Gateway& gateway, const provider::ModelHandle& handle,
                       std::span<const forge::CounterfactualRecord> records) {
  std::vector<Judged> judged(records.size());
  parallel_for(records.size(), handle.pacing.max_in_flight,
               [&](std::size_t i) { judged[i] = judge_cf_quality(gateway, handle, records[i]); });
  return collect(judged);
}

}  // namespace sentdiag::rubric
