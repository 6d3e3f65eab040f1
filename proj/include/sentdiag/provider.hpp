#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sentdiag/jsonl.hpp"

namespace sentdiag::provider {

using nlohmann::json;
using Millis = std::chrono::milliseconds;

struct Pacing {
  int max_in_flight = 4;
  Millis min_gap{0};
};

struct Backoff {
  Millis base{1000};
  double factor = 2.0;
  double jitter = 0.2;  // +/- fraction applied to each delay
};

// Everything needed to reach one model. The credential itself never lives
// here: auth_ref names the environment variable that holds it.
//
// endpoint schemes:
//   http://, https://   OpenAI-compatible chat-completions endpoint
//   mock://<profile>    bundled deterministic simulator (options = profile)
//   replay://<path>     answers from a previously written run log
struct ModelHandle {
  std::string name;
  std::string endpoint;
  std::string auth_ref;
  int max_attempts = 3;
  Millis timeout{60000};
  Pacing pacing;
  Backoff backoff;
  std::optional<double> temperature = 0.0;
  json options = json::object();
};

ModelHandle handle_from_json(const json& j);
json to_json(const ModelHandle& h);

enum class ExchangeStatus { ok, transport_error, timeout, refusal_or_empty };
std::string_view to_string(ExchangeStatus s);
ExchangeStatus status_from_string(std::string_view s);

struct RawExchange {
  std::string exchange_id;
  std::string model;
  std::string request_prompt;
  std::optional<std::string> response_text;  // present and non-empty iff status == ok
  ExchangeStatus status = ExchangeStatus::transport_error;
  int attempts = 0;
  Millis latency{0};
  std::chrono::system_clock::time_point timestamp{};
  std::string detail;
};

// Stable id for a (model, prompt) pair.
std::string exchange_id(std::string_view model, std::string_view prompt);

struct TransportReply {
  ExchangeStatus status = ExchangeStatus::transport_error;
  std::string text;
  std::string wire_request;   // request body as sent, no credentials
  std::string wire_response;  // response body as received
  std::string detail;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply send(const ModelHandle& handle, std::string_view prompt, const std::string& credential) = 0;
};

std::shared_ptr<Transport> make_http_transport();

// Append-only, serialized JSONL log of every exchange. With no path it keeps
// entries in memory only.
class RunLog {
 public:
  RunLog();
  // Appends to `path`; a new file starts with `header`.
  explicit RunLog(const std::filesystem::path& path, const std::optional<jsonl::Header>& header = std::nullopt);

  void append(const RawExchange& ex, const ModelHandle& handle, const TransportReply& last, const json& context);
  std::size_t size() const;
  std::vector<json> entries() const;

 private:
  mutable std::mutex mu_;
  std::optional<std::ofstream> out_;
  std::vector<json> entries_;
};

class Gateway {
 public:
  explicit Gateway(RunLog& log, std::uint64_t jitter_seed = 0x5eed);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Throws ConfigError when the handle names a credential variable that is
  // unset (before any transport call) and PreconditionError on an empty
  // prompt. Transport failures come back as a non-ok RawExchange.
  RawExchange complete(const ModelHandle& handle, std::string_view prompt);

  // Routes a model name to a specific transport, overriding endpoint dispatch.
  void bind(const std::string& model_name, std::shared_ptr<Transport> transport);

  // Key/value stamped on every subsequent log entry (exemplar hash, manifest).
  void set_context(const std::string& key, json value);

  RunLog& log() { return log_; }

 private:
  struct Pacer;
  std::shared_ptr<Transport> transport_for(const ModelHandle& handle);
  Pacer& pacer_for(const ModelHandle& handle);
  Millis backoff_delay(const ModelHandle& handle, int attempt);

  RunLog& log_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Transport>> bound_;
  std::map<std::string, std::shared_ptr<Transport>> by_endpoint_;
  std::map<std::string, std::unique_ptr<Pacer>> pacers_;
  json context_ = json::object();
  std::mt19937_64 jitter_rng_;
};

}  // namespace sentdiag::provider
