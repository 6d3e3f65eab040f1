#include <httplib.h>

#include "sentdiag/errors.hpp"
#include "sentdiag/provider.hpp"

namespace sentdiag::provider {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("bad endpoint URL " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/v1/chat/completions"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

// OpenAI-compatible chat completions: one user turn, pinned temperature.
class HttpTransport : public Transport {
 public:
  TransportReply send(const ModelHandle& handle, std::string_view prompt, const std::string& credential) override {
    const auto url = split_url(handle.endpoint);
    json body{{"model", handle.options.value("model", handle.name)},
              {"messages", json::array({json{{"role", "user"}, {"content", std::string(prompt)}}})}};
    if (handle.temperature) body["temperature"] = *handle.temperature;

    TransportReply reply;
    reply.wire_request = body.dump(-1, ' ', false, json::error_handler_t::replace);

    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(handle.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(handle.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!credential.empty()) headers.emplace("Authorization", "Bearer " + credential);

    auto res = client.Post(url.path, headers, reply.wire_request, "application/json");
    if (!res) {
      const auto err = res.error();
      reply.status = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                         ? ExchangeStatus::timeout
                         : ExchangeStatus::transport_error;
      reply.detail = httplib::to_string(err);
      return reply;
    }
    reply.wire_response = res->body;
    if (res->status != 200) {
      reply.status = ExchangeStatus::transport_error;
      reply.detail = "HTTP " + std::to_string(res->status);
      return reply;
    }
    auto parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty()) {
      reply.status = ExchangeStatus::transport_error;
      reply.detail = "malformed chat-completions body";
      return reply;
    }
    const auto& msg = parsed["choices"][0].value("message", json::object());
    if (msg.contains("refusal") && msg["refusal"].is_string()) {
      reply.status = ExchangeStatus::refusal_or_empty;
      reply.detail = "refusal: " + msg["refusal"].get<std::string>();
      return reply;
    }
    if (!msg.contains("content") || !msg["content"].is_string()) {
      reply.status = ExchangeStatus::refusal_or_empty;
      reply.detail = "no content";
      return reply;
    }
    reply.status = ExchangeStatus::ok;
    reply.text = msg["content"].get<std::string>();
    return reply;
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttpTransport>(); }

}  // namespace sentdiag::provider
