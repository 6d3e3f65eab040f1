#include <condition_variable>
#include <cstdlib>
#include <ctime>
#include <thread>

#include <fmt/format.h>

#include "sentdiag/errors.hpp"
#include "sentdiag/hashing.hpp"
#include "sentdiag/jsonl.hpp"
#include "sentdiag/mock_provider.hpp"
#include "sentdiag/provider.hpp"
#include "sentdiag/text.hpp"

namespace sentdiag::provider {

namespace {

std::string iso8601(std::chrono::system_clock::time_point tp) {
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(tp);
  const auto ms = std::chrono::duration_cast<Millis>(tp - secs).count();
  const std::time_t t = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

std::string scheme_of(std::string_view endpoint) {
  const auto pos = endpoint.find("://");
  return pos == std::string_view::npos ? std::string() : text::ascii_lower(endpoint.substr(0, pos));
}

}  // namespace

std::string_view to_string(ExchangeStatus s) {
  switch (s) {
    case ExchangeStatus::ok: return "ok";
    case ExchangeStatus::transport_error: return "transport_error";
    case ExchangeStatus::timeout: return "timeout";
    case ExchangeStatus::refusal_or_empty: return "refusal_or_empty";
  }
  return "transport_error";
}

ExchangeStatus status_from_string(std::string_view s) {
  if (s == "ok") return ExchangeStatus::ok;
  if (s == "timeout") return ExchangeStatus::timeout;
  if (s == "refusal_or_empty") return ExchangeStatus::refusal_or_empty;
  if (s == "transport_error") return ExchangeStatus::transport_error;
  throw Error("unknown exchange status '" + std::string(s) + "'");
}

std::string exchange_id(std::string_view model, std::string_view prompt) {
  std::string key(model);
  key += '\n';
  key += prompt;
  return sha256_hex(key).substr(0, 16);
}

ModelHandle handle_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model handle must be an object");
  ModelHandle h;
  if (!j.contains("name") || !j["name"].is_string() || j["name"].get<std::string>().empty()) {
    throw ConfigError("model handle: 'name' is required");
  }
  h.name = j["name"].get<std::string>();
  if (!j.contains("endpoint") || !j["endpoint"].is_string()) {
    throw ConfigError("model handle " + h.name + ": 'endpoint' is required");
  }
  h.endpoint = j["endpoint"].get<std::string>();
  h.auth_ref = j.value("auth_ref", "");
  h.max_attempts = j.value("max_attempts", 3);
  if (h.max_attempts < 1) throw ConfigError("model handle " + h.name + ": max_attempts must be >= 1");
  h.timeout = Millis(j.value("timeout_ms", 60000));
  h.pacing.max_in_flight = j.value("max_in_flight", 4);
  if (h.pacing.max_in_flight < 1) throw ConfigError("model handle " + h.name + ": max_in_flight must be >= 1");
  h.pacing.min_gap = Millis(j.value("min_gap_ms", 0));
  if (j.contains("backoff")) {
    const auto& b = j["backoff"];
    h.backoff.base = Millis(b.value("base_ms", 1000));
    h.backoff.factor = b.value("factor", 2.0);
    h.backoff.jitter = b.value("jitter", 0.2);
  }
  if (j.contains("temperature")) {
    h.temperature = j["temperature"].is_null() ? std::nullopt : std::optional<double>(j["temperature"].get<double>());
  }
  if (j.contains("options")) h.options = j["options"];
  return h;
}

json to_json(const ModelHandle& h) {
  return json{{"name", h.name},
              {"endpoint", h.endpoint},
              {"auth_ref", h.auth_ref},
              {"max_attempts", h.max_attempts},
              {"timeout_ms", h.timeout.count()},
              {"max_in_flight", h.pacing.max_in_flight},
              {"min_gap_ms", h.pacing.min_gap.count()},
              {"backoff", {{"base_ms", h.backoff.base.count()}, {"factor", h.backoff.factor}, {"jitter", h.backoff.jitter}}},
              {"temperature", h.temperature ? json(*h.temperature) : json(nullptr)},
              {"options", h.options}};
}

// ---------------------------------------------------------------------------
// RunLog

RunLog::RunLog() = default;

RunLog::RunLog(const std::filesystem::path& path, const std::optional<jsonl::Header>& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.emplace(path, std::ios::binary | std::ios::app);
  if (!*out_) throw ConfigError("cannot open run log " + path.string());
  if (fresh && header) {
    *out_ << jsonl::dump_line(jsonl::header_json(*header)) << '\n';
    out_->flush();
  }
}

void RunLog::append(const RawExchange& ex, const ModelHandle& handle, const TransportReply& last, const json& context) {
  json entry{{"exchange_id", ex.exchange_id},
             {"model", ex.model},
             {"endpoint", handle.endpoint},
             {"temperature", handle.temperature ? json(*handle.temperature) : json(nullptr)},
             {"status", to_string(ex.status)},
             {"attempts", ex.attempts},
             {"latency_ms", ex.latency.count()},
             {"timestamp", iso8601(ex.timestamp)},
             {"request_prompt", ex.request_prompt},
             {"response_text", ex.response_text ? json(*ex.response_text) : json(nullptr)},
             {"request_body", last.wire_request},
             {"response_body", last.wire_response},
             {"detail", ex.detail},
             {"context", context}};
  std::lock_guard lock(mu_);
  if (out_) {
    *out_ << jsonl::dump_line(entry) << '\n';
    out_->flush();
  }
  entries_.push_back(std::move(entry));
}

std::size_t RunLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::vector<json> RunLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

// ---------------------------------------------------------------------------
// Gateway

struct Gateway::Pacer {
  std::mutex mu;
  std::condition_variable cv;
  int in_flight = 0;
  std::chrono::steady_clock::time_point next_start{};

  void acquire(const Pacing& p) {
    std::chrono::steady_clock::time_point start;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return in_flight < p.max_in_flight; });
      ++in_flight;
      start = std::max(std::chrono::steady_clock::now(), next_start);
      next_start = start + p.min_gap;
    }
    std::this_thread::sleep_until(start);
  }

  void release() {
    {
      std::lock_guard lock(mu);
      --in_flight;
    }
    cv.notify_one();
  }
};

Gateway::Gateway(RunLog& log, std::uint64_t jitter_seed) : log_(log), jitter_rng_(jitter_seed) {}
Gateway::~Gateway() = default;

void Gateway::bind(const std::string& model_name, std::shared_ptr<Transport> transport) {
  std::lock_guard lock(mu_);
  bound_[model_name] = std::move(transport);
}

void Gateway::set_context(const std::string& key, json value) {
  std::lock_guard lock(mu_);
  context_[key] = std::move(value);
}

std::shared_ptr<Transport> Gateway::transport_for(const ModelHandle& handle) {
  std::lock_guard lock(mu_);
  if (auto it = bound_.find(handle.name); it != bound_.end()) return it->second;
  const auto scheme = scheme_of(handle.endpoint);
  // Mock transports carry per-handle state (script counters), so key by name too.
  const auto key = scheme == "mock" ? handle.name + "\n" + handle.endpoint : handle.endpoint;
  if (auto it = by_endpoint_.find(key); it != by_endpoint_.end()) return it->second;
  std::shared_ptr<Transport> t;
  if (scheme == "http" || scheme == "https") {
    t = make_http_transport();
  } else if (scheme == "mock") {
    t = make_mock_transport(handle);
  } else if (scheme == "replay") {
    t = make_replay_transport(handle.endpoint.substr(std::string_view("replay://").size()));
  } else {
    throw ConfigError("model " + handle.name + ": unsupported endpoint '" + handle.endpoint + "'");
  }
  by_endpoint_[key] = t;
  return t;
}

Gateway::Pacer& Gateway::pacer_for(const ModelHandle& handle) {
  std::lock_guard lock(mu_);
  auto& p = pacers_[handle.name];
  if (!p) p = std::make_unique<Pacer>();
  return *p;
}

Millis Gateway::backoff_delay(const ModelHandle& handle, int attempt) {
  double scale = 1.0;
  {
    std::lock_guard lock(mu_);
    const double u = static_cast<double>(jitter_rng_() >> 11) * 0x1.0p-53;
    scale = 1.0 + handle.backoff.jitter * (2.0 * u - 1.0);
  }
  double ms = static_cast<double>(handle.backoff.base.count());
  for (int i = 1; i < attempt; ++i) ms *= handle.backoff.factor;
  return Millis(static_cast<Millis::rep>(ms * scale));
}

RawExchange Gateway::complete(const ModelHandle& handle, std::string_view prompt) {
  if (text::trim(prompt).empty()) throw PreconditionError("prompt must be non-empty");
  std::string credential;
  if (!handle.auth_ref.empty()) {
    const char* v = std::getenv(handle.auth_ref.c_str());
    if (v == nullptr || *v == '\0') {
      throw ConfigError("model " + handle.name + ": credential variable " + handle.auth_ref + " is not set");
    }
    credential = v;
  }
  auto transport = transport_for(handle);
  auto& pacer = pacer_for(handle);

  RawExchange ex;
  ex.exchange_id = exchange_id(handle.name, prompt);
  ex.model = handle.name;
  ex.request_prompt = std::string(prompt);
  ex.timestamp = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();

  TransportReply last;
  const int max_attempts = std::max(1, handle.max_attempts);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    pacer.acquire(handle.pacing);
    try {
      last = transport->send(handle, prompt, credential);
    } catch (const std::exception& e) {
      last = TransportReply{ExchangeStatus::transport_error, {}, {}, {}, e.what()};
    }
    pacer.release();
    ex.attempts = attempt;
    if (last.status == ExchangeStatus::ok && text::trim(last.text).empty()) {
      last.status = ExchangeStatus::refusal_or_empty;
    }
    ex.status = last.status;
    ex.detail = last.detail;
    if (last.status == ExchangeStatus::ok) {
      ex.response_text = last.text;
      break;
    }
    if (attempt < max_attempts) std::this_thread::sleep_for(backoff_delay(handle, attempt));
  }
  ex.latency = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - t0);

  json context;
  {
    std::lock_guard lock(mu_);
    context = context_;
  }
  log_.append(ex, handle, last, context);
  return ex;
}

}  // namespace sentdiag::provider
