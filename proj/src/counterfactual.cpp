#include "sentdiag/counterfactual.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "sentdiag/errors.hpp"
#include "sentdiag/json_extract.hpp"
#include "sentdiag/parallel.hpp"
#include "sentdiag/text.hpp"

namespace sentdiag::forge {

using nlohmann::json;

namespace {

std::string normalize_component(std::string_view raw) {
  std::string out;
  for (char c : text::ascii_lower(text::trim(raw))) {
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (alnum) {
      out += c;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::optional<SentimentLabel> parse_polar(const json& v) {
  if (!v.is_string()) return std::nullopt;
  const auto s = text::ascii_lower(text::trim(v.get<std::string>()));
  if (s == "positive") return SentimentLabel::Positive;
  if (s == "negative") return SentimentLabel::Negative;
  if (s == "neutral") return SentimentLabel::Neutral;
  return std::nullopt;
}

void add_component(Candidate& c, std::string_view raw) {
  if (text::trim(raw).empty()) return;
  if (auto comp = parse_component(raw)) {
    if (std::find(c.components_changed.begin(), c.components_changed.end(), *comp) == c.components_changed.end()) {
      c.components_changed.push_back(*comp);
    }
  } else {
    c.quarantined_components.emplace_back(raw);
  }
}

std::optional<Candidate> parse_one(const json& obj, std::string_view original, std::string& reason) {
  if (!obj.is_object()) {
    reason = "candidate is not an object";
    return std::nullopt;
  }
  Candidate c;
  if (!obj.contains("cf_text") || !obj["cf_text"].is_string()) {
    reason = "candidate without cf_text";
    return std::nullopt;
  }
  c.cf_text = obj["cf_text"].get<std::string>();
  if (text::trim(c.cf_text).empty()) {
    reason = "empty cf_text";
    return std::nullopt;
  }
  if (text::trim(c.cf_text) == text::trim(original)) {
    reason = "cf_text identical to the original";
    return std::nullopt;
  }
  if (obj.contains("components_changed")) {
    const auto& comps = obj["components_changed"];
    if (comps.is_array()) {
      for (const auto& e : comps) {
        if (e.is_string()) {
          add_component(c, e.get<std::string>());
        } else {
          c.quarantined_components.push_back(e.dump());
        }
      }
    } else if (comps.is_string()) {
      const auto s = comps.get<std::string>();
      std::size_t i = 0;
      while (i <= s.size()) {
        const auto j = std::min(s.find(',', i), s.size());
        add_component(c, std::string_view(s).substr(i, j - i));
        i = j + 1;
      }
    }
  }
  if (obj.contains("flip_explanation") && obj["flip_explanation"].is_string()) {
    c.flip_explanation = obj["flip_explanation"].get<std::string>();
  }
  return c;
}

json candidate_json(const Candidate& c) {
  json comps = json::array();
  for (auto comp : c.components_changed) comps.push_back(to_string(comp));
  return json{{"cf_text", c.cf_text},
              {"components_changed", comps},
              {"quarantined_components", c.quarantined_components},
              {"flip_explanation", c.flip_explanation}};
}

Candidate candidate_from_json(const json& j) {
  Candidate c;
  c.cf_text = j.at("cf_text").get<std::string>();
  for (const auto& s : j.value("components_changed", json::array())) {
    auto comp = parse_component(s.get<std::string>());
    if (!comp) throw Error("record: unknown component " + s.dump());
    c.components_changed.push_back(*comp);
  }
  c.quarantined_components = j.value("quarantined_components", std::vector<std::string>{});
  c.flip_explanation = j.value("flip_explanation", "");
  return c;
}

SentimentLabel label_field(const json& j, const char* key) {
  auto l = parse_label_value(j.at(key));
  if (!l) throw Error(std::string("record: bad ") + key);
  return *l;
}

ValidationFlag flag_from_string(std::string_view s) {
  for (auto f : {ValidationFlag::identity, ValidationFlag::language_drift, ValidationFlag::length_ratio,
                 ValidationFlag::no_components}) {
    if (to_string(f) == s) return f;
  }
  throw Error("unknown validation flag '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(Component c) {
  switch (c) {
    case Component::keywords: return "keywords";
    case Component::phrases: return "phrases";
    case Component::negation: return "negation";
    case Component::intent_framing: return "intent_framing";
    case Component::tone: return "tone";
    case Component::sentiment_valence: return "sentiment_valence";
    case Component::emojis_icons: return "emojis_icons";
    case Component::code_mixing: return "code_mixing";
    case Component::intensifier: return "intensifier";
  }
  return "keywords";
}

std::optional<Component> parse_component(std::string_view raw) {
  static const std::unordered_map<std::string, Component> kAliases = {
      {"keywords", Component::keywords},
      {"keyword", Component::keywords},
      {"keyword_substitution", Component::keywords},
      {"key_word", Component::keywords},
      {"key_words", Component::keywords},
      {"word", Component::keywords},
      {"words", Component::keywords},
      {"lexical_substitution", Component::keywords},
      {"phrases", Component::phrases},
      {"phrase", Component::phrases},
      {"key_phrase", Component::phrases},
      {"key_phrases", Component::phrases},
      {"phrase_rewording", Component::phrases},
      {"phrasing", Component::phrases},
      {"rewording", Component::phrases},
      {"sentiment_phrase", Component::phrases},
      {"sentiment_phrases", Component::phrases},
      {"negation", Component::negation},
      {"negations", Component::negation},
      {"add_negation", Component::negation},
      {"intent_framing", Component::intent_framing},
      {"intent", Component::intent_framing},
      {"intent_shift", Component::intent_framing},
      {"framing", Component::intent_framing},
      {"tone", Component::tone},
      {"tone_shift", Component::tone},
      {"tone_intent_shift", Component::tone},
      {"tone_e_g_sarcasm", Component::tone},
      {"sarcasm", Component::tone},
      {"sentiment_valence", Component::sentiment_valence},
      {"valence", Component::sentiment_valence},
      {"valence_modulation", Component::sentiment_valence},
      {"polarity", Component::sentiment_valence},
      {"emojis_icons", Component::emojis_icons},
      {"emoji", Component::emojis_icons},
      {"emojis", Component::emojis_icons},
      {"emoji_icons", Component::emojis_icons},
      {"emoji_substitution", Component::emojis_icons},
      {"icons", Component::emojis_icons},
      {"icon", Component::emojis_icons},
      {"emoticon", Component::emojis_icons},
      {"emoticons", Component::emojis_icons},
      {"code_mixing", Component::code_mixing},
      {"codemixing", Component::code_mixing},
      {"code_mix", Component::code_mixing},
      {"code_switching", Component::code_mixing},
      {"language_mixing", Component::code_mixing},
      {"intensifier", Component::intensifier},
      {"intensifiers", Component::intensifier},
      {"intensity", Component::intensifier},
      {"intensification", Component::intensifier},
  };
  auto it = kAliases.find(normalize_component(raw));
  if (it == kAliases.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(ValidationFlag f) {
  switch (f) {
    case ValidationFlag::identity: return "identity";
    case ValidationFlag::language_drift: return "language_drift";
    case ValidationFlag::length_ratio: return "length_ratio";
    case ValidationFlag::no_components: return "no_components";
  }
  return "identity";
}

std::string_view to_string(SkipStage s) { return s == SkipStage::generation ? "generation" : "selection"; }

// ---------------------------------------------------------------------------
// prompts

std::string build_generation_prompt(const Message& message, SentimentLabel agreed) {
  if (agreed == SentimentLabel::Neutral) {
    throw PreconditionError("message " + message.id + " is Neutral; only Positive/Negative messages can be flipped");
  }
  std::string p;
  p += "You are an NLP assistant helping researchers generate high-quality counterfactual examples for sentiment "
       "classification.\n";
  p += "Given a WhatsApp-style message and its sentiment (Positive or Negative), generate 3 distinct versions that "
       "flip the sentiment.\n";
  p += "Only modify necessary components. Preserve fluency and realism. Respect informal tone.\n\n";
  p += "You may flip sentiment by changing components such as:\n";
  p += "- keywords, phrases, negation, intent framing, tone (e.g., sarcasm), sentiment valence, emojis/icons, "
       "code-mixing\n\n";
  p += "Input:\n";
  p += "Original message: " + text::quote(message.text) + "\n";
  p += "Original sentiment: \"" + std::string(to_string(agreed)) + "\"\n\n";
  p += "Output Format (JSON List of 3 Objects):\n";
  p += "{\n  \"cf_text\": \"...\",\n  \"components_changed\": [...],\n  \"flip_explanation\": \"...\"\n}\n";
  return p;
}

std::string build_selection_prompt(std::string_view original, SentimentLabel original_sentiment,
                                   std::span<const Candidate> candidates) {
  std::string p;
  p += "You are a sentiment evaluation assistant. Your task is to select the best counterfactual rewrite of a "
       "message.\n\n";
  p += "ORIGINAL MESSAGE\n";
  p += text::quote(original) + "\n";
  p += "(Sentiment: " + std::string(to_string(original_sentiment)) + ")\n\n";
  p += "COUNTERFACTUAL CANDIDATES\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    p += std::to_string(i + 1) + ". " + text::quote(candidates[i].cf_text) + "\n";
  }
  p += "\nINSTRUCTIONS\n";
  p += "Your goal is to identify which counterfactual most effectively flips the sentiment while remaining realistic "
       "and fluent.\n";
  p += "- Flip sentiment plausibly\n";
  p += "- Sound natural in WhatsApp chat\n";
  p += "- Preserve meaning/context where possible\n\n";
  p += "RESPONSE FORMAT (JSON only):\n";
  p += "{\n  \"selected_cf\": \"...\",\n  \"justification\": \"...\",\n  \"predicted_sentiment\": \"Positive / "
       "Negative\"\n}\n";
  return p;
}

// ---------------------------------------------------------------------------
// generation

std::optional<std::array<Candidate, 3>> parse_candidates(std::string_view reply, std::string_view original,
                                                         std::string& reason) {
  auto parsed = extract_json_list(reply);
  if (!parsed) {
    reason = "no JSON in generator reply";
    return std::nullopt;
  }
  json list = *parsed;
  // {"counterfactuals": [...]} and [{"counterfactuals": [...]}] wrappers.
  auto unwrap = [](const json& obj) -> std::optional<json> {
    if (!obj.is_object() || obj.size() != 1) return std::nullopt;
    const auto& only = obj.begin().value();
    if (only.is_array()) return only;
    return std::nullopt;
  };
  if (list.is_object()) {
    if (auto inner = unwrap(list)) {
      list = *inner;
    } else {
      list = json::array({list});
    }
  } else if (list.is_array() && list.size() == 1) {
    if (auto inner = unwrap(list[0])) list = *inner;
  }
  if (!list.is_array()) {
    reason = "generator reply is not a list";
    return std::nullopt;
  }
  if (list.size() != 3) {
    reason = "expected 3 candidates, got " + std::to_string(list.size());
    return std::nullopt;
  }
  std::array<Candidate, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    auto c = parse_one(list[i], original, reason);
    if (!c) return std::nullopt;
    out[i] = std::move(*c);
  }
  return out;
}

GenerationResult generate_candidates(provider::Gateway& gateway, const provider::ModelHandle& handle,
                                     const Message& message, SentimentLabel agreed) {
  const auto prompt = build_generation_prompt(message, agreed);
  GenerationResult result;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    result.attempts = attempt;
    const auto ex = gateway.complete(handle, prompt);
    if (ex.status != provider::ExchangeStatus::ok || !ex.response_text) {
      result.failure_reason = "generator exchange " + std::string(provider::to_string(ex.status));
      continue;
    }
    std::string reason;
    if (auto cands = parse_candidates(*ex.response_text, message.text, reason)) {
      result.candidates = std::move(cands);
      result.failure_reason.clear();
      return result;
    }
    result.failure_reason = reason;
  }
  return result;
}

// ---------------------------------------------------------------------------
// selection

std::optional<SelectionMatch> match_selection(std::string_view selected, std::span<const Candidate> candidates) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].cf_text == selected) return SelectionMatch{i, false, 0};
  }
  std::optional<SelectionMatch> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto d = text::edit_distance(selected, candidates[i].cf_text);
    if (!best || d < best->distance) best = SelectionMatch{i, true, d};
  }
  if (!best) return std::nullopt;
  const double limit = kSelectionEditTolerance * static_cast<double>(text::codepoint_length(candidates[best->index].cf_text));
  if (static_cast<double>(best->distance) > limit) return std::nullopt;
  return best;
}

SelectionResult select_candidate(provider::Gateway& gateway, const provider::ModelHandle& handle,
                                 std::string_view original, SentimentLabel original_sentiment,
                                 std::span<const Candidate> candidates) {
  if (candidates.size() != 3) {
    throw PreconditionError("selection needs exactly 3 candidates, got " + std::to_string(candidates.size()));
  }
  SelectionResult result;
  const auto ex = gateway.complete(handle, build_selection_prompt(original, original_sentiment, candidates));
  if (ex.status != provider::ExchangeStatus::ok || !ex.response_text) {
    result.failure_reason = "filter exchange " + std::string(provider::to_string(ex.status));
    return result;
  }
  const auto parsed = extract_json(*ex.response_text);
  if (!parsed || !parsed->is_object()) {
    result.failure_reason = "no JSON object in filter reply";
    return result;
  }
  if (!parsed->contains("selected_cf") || !(*parsed)["selected_cf"].is_string()) {
    result.failure_reason = "filter reply without selected_cf";
    return result;
  }
  auto match = match_selection((*parsed)["selected_cf"].get<std::string>(), candidates);
  if (!match) {
    result.failure_reason = "selected_cf matches no candidate within tolerance";
    return result;
  }
  Selection sel;
  sel.match = *match;
  if (parsed->contains("justification") && (*parsed)["justification"].is_string()) {
    sel.justification = (*parsed)["justification"].get<std::string>();
  }
  if (parsed->contains("predicted_sentiment")) sel.predicted_sentiment = parse_polar((*parsed)["predicted_sentiment"]);
  result.selection = std::move(sel);
  return result;
}

// ---------------------------------------------------------------------------
// validation

bool language_drift(std::string_view original, std::string_view flip) {
  std::set<std::string> foreign;
  for (const auto& t : text::word_tokens(original)) {
    const bool numeric = std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (!numeric && !text::is_common_english(t)) foreign.insert(t);
  }
  if (foreign.empty()) return false;
  const auto flip_tokens = text::word_tokens(flip);
  const std::set<std::string> in_flip(flip_tokens.begin(), flip_tokens.end());
  std::size_t survived = 0;
  for (const auto& t : foreign) survived += in_flip.count(t);
  return static_cast<double>(survived) / static_cast<double>(foreign.size()) < kDriftSurvivalThreshold;
}

std::vector<ValidationFlag> validate_flip(const CounterfactualRecord& record) {
  std::vector<ValidationFlag> flags;
  const auto& chosen = record.selected_candidate();
  if (chosen.cf_text == record.original_text) flags.push_back(ValidationFlag::identity);
  if (language_drift(record.original_text, chosen.cf_text)) flags.push_back(ValidationFlag::language_drift);
  const auto orig_len = text::codepoint_length(record.original_text);
  const auto flip_len = text::codepoint_length(chosen.cf_text);
  const double ratio = orig_len == 0 ? 0.0 : static_cast<double>(flip_len) / static_cast<double>(orig_len);
  if (ratio < kMinLengthRatio || ratio > kMaxLengthRatio) flags.push_back(ValidationFlag::length_ratio);
  if (chosen.components_changed.empty()) flags.push_back(ValidationFlag::no_components);
  return flags;
}

// ---------------------------------------------------------------------------
// orchestration

std::size_t ForgeResult::generation_failed() const {
  return static_cast<std::size_t>(
      std::count_if(skips.begin(), skips.end(), [](const Skip& s) { return s.stage == SkipStage::generation; }));
}

std::size_t ForgeResult::selection_failed() const {
  return static_cast<std::size_t>(
      std::count_if(skips.begin(), skips.end(), [](const Skip& s) { return s.stage == SkipStage::selection; }));
}

ForgeResult forge(provider::Gateway& gateway, const provider::ModelHandle& generator,
                  const provider::ModelHandle& filter, std::span<const Message> cf_pool) {
  struct Slot {
    std::optional<CounterfactualRecord> record;
    std::optional<Skip> skip;
  };
  std::vector<Slot> slots(cf_pool.size());
  const int workers = std::min(generator.pacing.max_in_flight, filter.pacing.max_in_flight);
  parallel_for(cf_pool.size(), workers, [&](std::size_t i) {
    const auto& m = cf_pool[i];
    if (!m.agreed() || m.agreed_label() == SentimentLabel::Neutral) {
      throw PreconditionError("cf_pool message " + m.id + " is not an agreed non-Neutral message");
    }
    const auto original = m.agreed_label();
    auto gen = generate_candidates(gateway, generator, m, original);
    if (!gen.candidates) {
      slots[i].skip = Skip{m.id, SkipStage::generation, gen.failure_reason};
      return;
    }
    auto sel = select_candidate(gateway, filter, m.text, original, *gen.candidates);
    if (!sel.selection) {
      slots[i].skip = Skip{m.id, SkipStage::selection, sel.failure_reason};
      return;
    }
    CounterfactualRecord r;
    r.source_id = m.id;
    r.original_text = m.text;
    r.original_sentiment = original;
    r.target_sentiment = opposite(original);
    r.candidates = std::move(*gen.candidates);
    r.selected = sel.selection->match.index;
    r.selection_mismatch = sel.selection->match.mismatch;
    r.selection_justification = sel.selection->justification;
    r.predicted_sentiment = sel.selection->predicted_sentiment;
    r.flip_disputed = r.predicted_sentiment == original;
    r.generator_model = generator.name;
    r.filter_model = filter.name;
    r.validation_flags = validate_flip(r);
    slots[i].record = std::move(r);
  });

  ForgeResult out;
  for (auto& s : slots) {
    if (s.record) out.records.push_back(std::move(*s.record));
    if (s.skip) out.skips.push_back(std::move(*s.skip));
  }
  return out;
}

std::map<std::string, std::size_t> component_histogram(std::span<const CounterfactualRecord> records) {
  std::map<std::string, std::size_t> h;
  for (const auto& r : records) {
    const auto& c = r.selected_candidate();
    for (auto comp : c.components_changed) ++h[std::string(to_string(comp))];
    for (const auto& q : c.quarantined_components) ++h["unknown:" + q];
    if (c.components_changed.empty() && c.quarantined_components.empty()) ++h["unspecified"];
  }
  return h;
}

std::string synthetic_id(std::string_view source_id) { return std::string(source_id) + ":cf"; }

std::vector<Message> synthetic_corpus(std::span<const CounterfactualRecord> records) {
  std::vector<Message> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Message m;
    m.id = synthetic_id(r.source_id);
    m.text = r.selected_candidate().cf_text;
    m.annotator_labels = {r.target_sentiment, r.target_sentiment};
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// serialization

json to_json(const CounterfactualRecord& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) cands.push_back(candidate_json(c));
  json flags = json::array();
  for (auto f : r.validation_flags) flags.push_back(to_string(f));
  return json{{"source_id", r.source_id},
              {"original_text", r.original_text},
              {"original_sentiment", to_string(r.original_sentiment)},
              {"target_sentiment", to_string(r.target_sentiment)},
              {"candidates", cands},
              {"selected", r.selected},
              {"selected_text", r.selected_candidate().cf_text},
              {"selection_justification", r.selection_justification},
              {"predicted_sentiment", r.predicted_sentiment ? json(to_string(*r.predicted_sentiment)) : json(nullptr)},
              {"selection_mismatch", r.selection_mismatch},
              {"flip_disputed", r.flip_disputed},
              {"validation_flags", flags},
              {"generator_model", r.generator_model},
              {"filter_model", r.filter_model}};
}

CounterfactualRecord record_from_json(const json& j) {
  CounterfactualRecord r;
  r.source_id = j.at("source_id").get<std::string>();
  r.original_text = j.at("original_text").get<std::string>();
  r.original_sentiment = label_field(j, "original_sentiment");
  r.target_sentiment = label_field(j, "target_sentiment");
  if (r.original_sentiment == SentimentLabel::Neutral || r.target_sentiment != opposite(r.original_sentiment)) {
    throw Error("record " + r.source_id + ": target must be the opposite of a non-Neutral original");
  }
  const auto& cands = j.at("candidates");
  if (!cands.is_array() || cands.size() != 3) throw Error("record " + r.source_id + ": needs 3 candidates");
  for (std::size_t i = 0; i < 3; ++i) r.candidates[i] = candidate_from_json(cands[i]);
  r.selected = j.at("selected").get<std::size_t>();
  if (r.selected >= 3) throw Error("record " + r.source_id + ": selected index out of range");
  r.selection_justification = j.value("selection_justification", "");
  if (j.contains("predicted_sentiment") && !j["predicted_sentiment"].is_null()) {
    r.predicted_sentiment = parse_label_value(j["predicted_sentiment"]);
  }
  r.selection_mismatch = j.value("selection_mismatch", false);
  r.flip_disputed = j.value("flip_disputed", false);
  for (const auto& f : j.value("validation_flags", json::array())) {
    r.validation_flags.push_back(flag_from_string(f.get<std::string>()));
  }
  r.generator_model = j.value("generator_model", "");
  r.filter_model = j.value("filter_model", "");
  return r;
}

json to_json(const Skip& s) {
  return json{{"source_id", s.source_id}, {"stage", to_string(s.stage)}, {"reason", s.reason}};
}

Skip skip_from_json(const json& j) {
  Skip s;
  s.source_id = j.at("source_id").get<std::string>();
  s.stage = j.at("stage").get<std::string>() == "selection" ? SkipStage::selection : SkipStage::generation;
  s.reason = j.value("reason", "");
  return s;
}

}  // namespace sentdiag::forge
