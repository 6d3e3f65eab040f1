#include "sentdiag/mock_provider.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "sentdiag/errors.hpp"
#include "sentdiag/hashing.hpp"
#include "sentdiag/jsonl.hpp"
#include "sentdiag/text.hpp"

namespace sentdiag::provider {

namespace {

// ---------------------------------------------------------------------------
// prompt scraping

std::optional<std::string> quoted_after(std::string_view prompt, std::string_view marker) {
  const auto pos = prompt.rfind(marker);
  if (pos == std::string_view::npos) return std::nullopt;
  auto rest = prompt.substr(pos + marker.size());
  const auto q = rest.find('"');
  if (q == std::string_view::npos) return std::nullopt;
  rest = rest.substr(q);
  const auto eol = rest.find('\n');
  auto line = rest.substr(0, eol);
  // Strip anything after the closing quote of the JSON string literal.
  for (std::size_t end = line.size(); end > 1; --end) {
    if (line[end - 1] != '"') continue;
    auto v = json::parse(line.substr(0, end), nullptr, false);
    if (!v.is_discarded() && v.is_string()) return v.get<std::string>();
  }
  return std::nullopt;
}

std::optional<std::string> word_after(std::string_view prompt, std::string_view marker) {
  const auto pos = prompt.rfind(marker);
  if (pos == std::string_view::npos) return std::nullopt;
  auto rest = prompt.substr(pos + marker.size());
  std::string w;
  for (char c : rest) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      w += c;
    } else if (!w.empty()) {
      break;
    }
  }
  if (w.empty()) return std::nullopt;
  return w;
}

bool is_positive_name(const std::string& s) { return text::iequals_ascii(s, "positive"); }

// ---------------------------------------------------------------------------
// tiny cue lexicons for the simulated classifier

const std::set<std::string>& positive_words() {
  static const std::set<std::string> s = {
      "poa", "nice", "happy", "asante", "thanks", "thank", "love", "napenda", "nimefurahi", "furaha",
      "good", "great", "better", "safi", "fiti", "mzuri", "nzuri", "proud", "blessed", "hongera",
      "congrats", "enjoyed", "fun", "hope", "haha", "hahaha", "ahahhaa", "hahaaaaa", "support",
      "strong", "amazing", "best", "freshi", "bora", "umefanya", "nimefurahishwa", "shukran"};
  return s;
}

const std::set<std::string>& negative_words() {
  static const std::set<std::string> s = {
      "tired", "sad", "hate", "mbaya", "sipendi", "siko", "sick", "pain", "naumwa", "nakohoa",
      "stress", "stressed", "angry", "boring", "wananiboo", "uchungu", "shida", "problem", "worried",
      "disappointing", "not", "sio", "hapana", "ugh", "ughhh", "fear", "scared", "alone", "worse",
      "terrible", "bad", "hawajatext", "nimechoka", "mgonjwa", "huzuni", "kuaibisha"};
  return s;
}

const std::set<char32_t>& positive_emoji() {
  static const std::set<char32_t> s = {0x1F60A, 0x1F642, 0x1F602, 0x1F923, 0x2764, 0x1F44D, 0x1F64F,
                                       0x1F4AA, 0x1F60D, 0x1F970, 0x2728, 0x1F389, 0x1F600, 0x1F601};
  return s;
}

const std::set<char32_t>& negative_emoji() {
  static const std::set<char32_t> s = {0x1F622, 0x1F62D, 0x1F621, 0x1F61E, 0x1F44E, 0x1F494,
                                       0x1F629, 0x1F624, 0x1F614, 0x1F612, 0x1F620};
  return s;
}

struct Cues {
  std::vector<std::string> positive;
  std::vector<std::string> negative;
};

Cues find_cues(std::string_view msg) {
  Cues c;
  for (const auto& tok : text::word_tokens(msg)) {
    if (positive_words().contains(tok)) c.positive.push_back(tok);
    if (negative_words().contains(tok)) c.negative.push_back(tok);
  }
  for (char32_t cp : text::decode_utf8(msg)) {
    if (positive_emoji().contains(cp)) c.positive.push_back(text::encode_utf8(std::u32string(1, cp)));
    if (negative_emoji().contains(cp)) c.negative.push_back(text::encode_utf8(std::u32string(1, cp)));
  }
  return c;
}

// ---------------------------------------------------------------------------
// counterfactual rewriting helpers

const std::map<std::string, std::string>& swap_words() {
  static const std::map<std::string, std::string> m = {
      {"napenda", "sipendi"}, {"sipendi", "napenda"}, {"nice", "bad"},      {"good", "bad"},
      {"bad", "good"},        {"happy", "sad"},       {"sad", "happy"},     {"love", "hate"},
      {"hate", "love"},       {"poa", "mbaya"},       {"mbaya", "poa"},     {"great", "terrible"},
      {"better", "worse"},    {"worse", "better"},    {"tired", "fresh"},   {"boring", "fun"},
      {"fun", "boring"},      {"enjoyed", "hated"},   {"sick", "well"},     {"nzuri", "mbaya"},
      {"mzuri", "mbaya"},     {"safi", "mbovu"},      {"proud", "ashamed"}, {"stressed", "relaxed"}};
  return m;
}

std::string swap_keywords(const std::string& msg, bool& swapped) {
  swapped = false;
  std::string out;
  std::size_t i = 0;
  while (i < msg.size()) {
    const auto j = std::min(msg.find(' ', i), msg.size());
    std::string word = msg.substr(i, j - i);
    const auto lowered = text::ascii_lower(word);
    if (auto it = swap_words().find(lowered); it != swap_words().end()) {
      word = it->second;
      swapped = true;
    }
    out += word;
    if (j < msg.size()) out += ' ';
    i = j + 1;
  }
  return out;
}

std::string swap_emoji(const std::string& msg, bool to_positive, bool& swapped) {
  swapped = false;
  auto u = text::decode_utf8(msg);
  for (auto& cp : u) {
    if (!to_positive && positive_emoji().contains(cp)) {
      cp = 0x1F61E;
      swapped = true;
    } else if (to_positive && negative_emoji().contains(cp)) {
      cp = 0x1F60A;
      swapped = true;
    }
  }
  return text::encode_utf8(u);
}

json candidate(std::string cf_text, std::vector<std::string> components, std::string why) {
  return json{{"cf_text", std::move(cf_text)}, {"components_changed", std::move(components)},
              {"flip_explanation", std::move(why)}};
}

double token_overlap(std::string_view a, std::string_view b) {
  const auto ta = text::word_tokens(a);
  const auto tb = text::word_tokens(b);
  std::set<std::string> sa(ta.begin(), ta.end());
  std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

// ---------------------------------------------------------------------------

class MockTransport : public Transport {
 public:
  MockTransport(std::string model, MockProfile profile) : model_(std::move(model)), profile_(std::move(profile)) {
    if (!profile_.script.empty()) load_script(profile_.script);
  }

  TransportReply send(const ModelHandle&, std::string_view prompt, const std::string&) override {
    TransportReply r;
    r.wire_request = std::string(prompt);
    if (auto scripted = from_script(prompt)) {
      r = *scripted;
    } else {
      r.status = ExchangeStatus::ok;
      r.text = simulate(prompt);
    }
    r.wire_response = r.text;
    return r;
  }

 private:
  double roll(std::string_view knob, std::string_view prompt) const {
    std::string key = model_;
    key += '|';
    key += knob;
    key += '|';
    key += prompt;
    return hash_unit(key);
  }

  void load_script(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("mock script not found: " + path);
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("mock script is not a JSON object: " + path);
    const auto table = j.value("by_prompt_sha256", json::object());
    for (auto& [hash, reply] : table.items()) {
      script_[hash] = reply.is_array() ? reply : json::array({reply});
    }
  }

  std::optional<TransportReply> from_script(std::string_view prompt) {
    if (script_.empty()) return std::nullopt;
    const auto h = sha256_hex(prompt);
    auto it = script_.find(h);
    if (it == script_.end()) return std::nullopt;
    std::size_t n = 0;
    {
      std::lock_guard lock(mu_);
      n = calls_[h]++;
    }
    const auto& entry = it->second[std::min(n, it->second.size() - 1)];
    TransportReply r;
    if (entry.is_string()) {
      r.status = ExchangeStatus::ok;
      r.text = entry.get<std::string>();
    } else {
      r.status = status_from_string(entry.value("status", "ok"));
      r.text = entry.value("text", "");
      r.detail = "scripted";
    }
    return r;
  }

  std::string simulate(std::string_view prompt) const {
    if (prompt.find("You are an NLP assistant for sentiment analysis.") == 0) return classify(prompt);
    if (prompt.find("You are an NLP assistant helping researchers generate") == 0) return generate(prompt);
    if (prompt.find("You are a sentiment evaluation assistant.") == 0) return select(prompt);
    if (prompt.find("evaluating the quality of a sentiment explanation") != std::string_view::npos) {
      return judge_explanation(prompt);
    }
    if (prompt.find("You are evaluating a synthetic") == 0) return judge_cf(prompt);
    return "{}";
  }

  std::string classify(std::string_view prompt) const {
    const auto query = quoted_after(prompt, "\nQUERY: ");
    if (!query) return "I could not find a message to classify.";
    if (roll("coverage", prompt) >= profile_.coverage) {
      return "Sorry, I am unable to determine the sentiment of this message.";
    }
    const auto cues = find_cues(*query);
    const auto score = static_cast<long>(cues.positive.size()) - static_cast<long>(cues.negative.size());
    std::string label = score > 0 ? "Positive" : score < 0 ? "Negative" : "Neutral";
    if (roll("noise", prompt) < profile_.label_noise) {
      static const std::array<std::string, 3> names = {"Positive", "Negative", "Neutral"};
      const auto self = std::find(names.begin(), names.end(), label) - names.begin();
      const auto step = roll("noise-pick", prompt) < 0.5 ? 1 : 2;
      label = names[(self + step) % 3];
    }
    std::vector<std::string> keywords;
    const auto& chosen = label == "Negative" ? cues.negative : cues.positive;
    for (const auto& k : chosen) {
      if (keywords.size() < 4) keywords.push_back(k);
    }
    std::string explanation;
    if (keywords.empty()) {
      explanation = "The message reads as routine conversation without strong emotional cues, so it is " + label + ".";
    } else {
      explanation = "The message uses";
      for (std::size_t i = 0; i < keywords.size(); ++i) {
        explanation += (i == 0 ? " '" : ", '") + keywords[i] + "'";
      }
      explanation += ", which signal " + text::ascii_lower(label) + " sentiment in this informal chat.";
    }
    const int confidence = 3 + static_cast<int>(roll("confidence", prompt) * 3.0);
    json out{{"justification", {{"keywords", keywords}, {"explanation", explanation}}},
             {"sentiment", label},
             {"confidence_score", std::to_string(confidence)}};
    const auto body = out.dump(2, ' ', false, json::error_handler_t::replace);
    return roll("fence", prompt) < 0.3 ? "```json\n" + body + "\n```" : body;
  }

  std::string generate(std::string_view prompt) const {
    const auto original = quoted_after(prompt, "Original message: ");
    const auto sentiment = quoted_after(prompt, "Original sentiment: ");
    if (!original || !sentiment) return "[]";
    const bool to_positive = !is_positive_name(*sentiment);
    const std::string target = to_positive ? "positive" : "negative";

    json list = json::array();
    bool swapped = false;
    auto lexical = swap_keywords(*original, swapped);
    if (swapped) {
      list.push_back(candidate(lexical, {"keywords"}, "Swapping the sentiment-bearing word makes the message " + target + "."));
    } else if (to_positive) {
      list.push_back(candidate(*original + " lakini sasa niko sawa", {"phrases"},
                               "Adding a reassuring closing phrase turns the message " + target + "."));
    } else {
      list.push_back(candidate("Sio kweli, " + *original, {"negation"},
                               "Prefixing a denial negates the original stance, making it " + target + "."));
    }
    auto emoji = swap_emoji(*original, to_positive, swapped);
    if (!swapped) emoji = *original + (to_positive ? " \U0001F60A" : " \U0001F61E");
    list.push_back(candidate(emoji, {"emojis/icons", "tone"}, "Changing the emoji shifts the tone to " + target + "."));

    std::vector<std::string> comps = {"phrases", roll("valence-alias", prompt) < 0.5 ? "valence" : "intensifier"};
    if (roll("unknown-component", prompt) < profile_.unknown_component) comps.push_back("register");
    list.push_back(candidate(*original + (to_positive ? " kabisa, nimefurahi sana" : " kabisa, sipendi hii"), comps,
                             "An intensified closing phrase makes the sentiment clearly " + target + "."));

    // Keep the three texts distinct.
    std::set<std::string> seen;
    for (auto& c : list) {
      auto t = c["cf_text"].get<std::string>();
      while (seen.contains(t) || t == *original) t += " kweli";
      seen.insert(t);
      c["cf_text"] = t;
    }
    if (roll("generation-failure", prompt) < profile_.generation_failure) list.erase(list.end() - 1);
    return list.dump(2, ' ', false, json::error_handler_t::replace);
  }

  std::string select(std::string_view prompt) const {
    const auto original = quoted_after(prompt, "ORIGINAL MESSAGE\n");
    const auto sentiment = word_after(prompt, "(Sentiment: ");
    std::vector<std::string> cands;
    for (const char* marker : {"\n1. ", "\n2. ", "\n3. "}) {
      if (auto c = quoted_after(prompt, marker)) cands.push_back(*c);
    }
    if (!original || !sentiment || cands.empty()) return "I cannot pick a candidate.";
    // Mostly the closest rewrite, otherwise a hash-chosen one, so every
    // candidate style gets selected somewhere in a batch.
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const double s = token_overlap(*original, cands[i]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    if (roll("pick-other", prompt) < 0.6) {
      best = static_cast<std::size_t>(roll("pick", prompt) * static_cast<double>(cands.size())) % cands.size();
    }
    std::string selected = cands[best];
    if (roll("fabricate", prompt) < profile_.fabricated_selection) {
      selected = "A completely different message that was never proposed.";
    } else if (roll("whitespace", prompt) < profile_.whitespace_mangle) {
      if (auto sp = selected.find(' '); sp != std::string::npos) selected.insert(sp, " ");
      else selected += " ";
    }
    std::string predicted = is_positive_name(*sentiment) ? "Negative" : "Positive";
    if (roll("disputed", prompt) < profile_.disputed_selection) predicted = *sentiment;
    json out{{"selected_cf", selected},
             {"justification", "Candidate " + std::to_string(best + 1) + " flips the sentiment most plausibly."},
             {"predicted_sentiment", predicted}};
    return out.dump(2, ' ', false, json::error_handler_t::replace);
  }

  std::string malformed(std::string_view prompt) const {
    const double u = roll("malformed-kind", prompt);
    if (u < 0.34) return "The explanation looks fine to me overall.";
    if (u < 0.67) return R"({"faithfulness": 2, "contextual_appropriateness": 1, "logical_coherence": 1, "clarity_and_completeness": 1})";
    return R"({"fluency": 1, "naturalness": "yes"})";
  }

  int binary(std::string_view knob, std::string_view prompt, double p) const { return roll(knob, prompt) < p ? 1 : 0; }

  std::string judge_explanation(std::string_view prompt) const {
    if (roll("judge-malformed", prompt) < profile_.judge_malformed) return malformed(prompt);
    const auto message = quoted_after(prompt, "Message:\n");
    const auto explanation = quoted_after(prompt, "Explanation: ");
    if (!message || !explanation) return "{}";
    // Quoted terms the explanation attributes to the message must occur in it.
    bool hallucinated = false;
    const auto lowered_msg = text::ascii_lower(*message);
    for (std::size_t p = explanation->find('\''); p != std::string::npos;) {
      const auto q = explanation->find('\'', p + 1);
      if (q == std::string::npos) break;
      const auto term = text::ascii_lower(explanation->substr(p + 1, q - p - 1));
      if (!term.empty() && lowered_msg.find(term) == std::string::npos) hallucinated = true;
      p = explanation->find('\'', q + 1);
    }
    json out{{"faithfulness", hallucinated ? 0 : binary("faithfulness", prompt, profile_.judge_pass)},
             {"contextual_appropriateness", binary("contextual", prompt, profile_.judge_pass)},
             {"logical_coherence", binary("coherence", prompt, profile_.judge_pass)},
             {"clarity_and_completeness", binary("clarity", prompt, profile_.judge_pass)},
             {"annotator_comment", hallucinated ? "Explanation cites words that are not in the message." : ""}};
    return out.dump(2);
  }

  std::string judge_cf(std::string_view prompt) const {
    if (roll("judge-malformed", prompt) < profile_.judge_malformed) return malformed(prompt);
    json out{{"fluency", binary("fluency", prompt, profile_.judge_pass)},
             {"naturalness", binary("naturalness", prompt, profile_.judge_pass)},
             {"sentiment_flip_clarity", binary("flip", prompt, profile_.judge_pass)},
             {"meaning_preservation", binary("meaning", prompt, profile_.meaning_pass)},
             {"annotator_comment", ""}};
    return out.dump(2);
  }

  std::string model_;
  MockProfile profile_;
  std::unordered_map<std::string, json> script_;
  std::mutex mu_;
  std::unordered_map<std::string, std::size_t> calls_;
};

class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& path) {
    const auto contents = jsonl::read_file(path);
    for (const auto& e : contents.records) {
      const auto model = e.value("model", "");
      const auto prompt = e.value("request_prompt", "");
      TransportReply r;
      r.status = status_from_string(e.value("status", "transport_error"));
      if (e.contains("response_text") && e["response_text"].is_string()) r.text = e["response_text"].get<std::string>();
      r.detail = "replayed";
      table_[exchange_id(model, prompt)] = r;
    }
  }

  TransportReply send(const ModelHandle& handle, std::string_view prompt, const std::string&) override {
    auto it = table_.find(exchange_id(handle.name, prompt));
    if (it == table_.end()) return {ExchangeStatus::transport_error, {}, {}, {}, "prompt not present in replay log"};
    return it->second;
  }

 private:
  std::unordered_map<std::string, TransportReply> table_;
};

}  // namespace

MockProfile MockProfile::from_json(const json& o) {
  MockProfile p;
  if (!o.is_object()) return p;
  p.coverage = o.value("coverage", p.coverage);
  p.label_noise = o.value("label_noise", p.label_noise);
  p.generation_failure = o.value("generation_failure", p.generation_failure);
  p.unknown_component = o.value("unknown_component", p.unknown_component);
  p.disputed_selection = o.value("disputed_selection", p.disputed_selection);
  p.whitespace_mangle = o.value("whitespace_mangle", p.whitespace_mangle);
  p.fabricated_selection = o.value("fabricated_selection", p.fabricated_selection);
  p.judge_pass = o.value("judge_pass", p.judge_pass);
  p.meaning_pass = o.value("meaning_pass", p.meaning_pass);
  p.judge_malformed = o.value("judge_malformed", p.judge_malformed);
  p.script = o.value("script", p.script);
  return p;
}

std::shared_ptr<Transport> make_mock_transport(const ModelHandle& handle) {
  return std::make_shared<MockTransport>(handle.name, MockProfile::from_json(handle.options));
}

std::shared_ptr<Transport> make_replay_transport(const std::filesystem::path& run_log) {
  return std::make_shared<ReplayTransport>(run_log);
}

}  // namespace sentdiag::provider
