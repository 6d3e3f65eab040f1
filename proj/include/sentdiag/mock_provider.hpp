#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "sentdiag/provider.hpp"

namespace sentdiag::provider {

// Behaviour knobs for the bundled simulator (ModelHandle::options). All
// randomness is a pure function of (model name, prompt, knob), so identical
// prompts always produce identical replies.
struct MockProfile {
  double coverage = 1.0;             // P(classification answered with valid JSON)
  double label_noise = 0.0;          // P(label replaced by a different class)
  double generation_failure = 0.0;   // P(generator returns 2 items instead of 3)
  double unknown_component = 0.1;    // P(a candidate carries an off-taxonomy component)
  double disputed_selection = 0.1;   // P(filter predicts the original sentiment)
  double whitespace_mangle = 0.1;    // P(filter echoes the selection with altered spacing)
  double fabricated_selection = 0.0; // P(filter returns text matching no candidate)
  double judge_pass = 0.9;           // P(any rubric dimension scored 1)
  double meaning_pass = 0.6;         // P(meaning_preservation scored 1)
  double judge_malformed = 0.0;      // P(judge reply violates the rubric schema)
  std::string script;                // optional JSON table of canned replies

  static MockProfile from_json(const json& options);
};

// Deterministic simulator that understands the harness's own prompt formats.
// A script file ({"by_prompt_sha256": {"<sha>": "reply" | ["r1", "r2", ...]}})
// takes precedence; list entries are served in call order, the last repeating.
// A reply may also be {"status": "transport_error" | "timeout" | "refusal_or_empty"}.
std::shared_ptr<Transport> make_mock_transport(const ModelHandle& handle);

// Serves the response logged for (model, prompt) in an earlier run log.
std::shared_ptr<Transport> make_replay_transport(const std::filesystem::path& run_log);

// Test double: every call is answered by a function of (prompt, call number).
class ScriptedTransport : public Transport {
 public:
  using Script = std::function<TransportReply(std::string_view prompt, int call_no)>;
  explicit ScriptedTransport(Script script) : script_(std::move(script)) {}

  TransportReply send(const ModelHandle&, std::string_view prompt, const std::string&) override {
    return script_(prompt, calls_.fetch_add(1) + 1);
  }
  int calls() const { return calls_.load(); }

  static TransportReply ok(std::string text) { return {ExchangeStatus::ok, std::move(text), {}, {}, {}}; }
  static TransportReply fail(ExchangeStatus s = ExchangeStatus::transport_error) { return {s, {}, {}, {}, "scripted failure"}; }

 private:
  Script script_;
  std::atomic<int> calls_{0};
};

}  // namespace sentdiag::provider
