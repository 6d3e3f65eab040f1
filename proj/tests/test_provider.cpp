#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "sentdiag/errors.hpp"
#include "sentdiag/hashing.hpp"
#include "sentdiag/mock_provider.hpp"
#include "sentdiag/parallel.hpp"
#include "sentdiag/provider.hpp"
#include "support.hpp"

using namespace sentdiag;
using namespace sentdiag::provider;
using nlohmann::json;

TEST(Handle, FromJsonDefaultsAndValidation) {
  const auto h = handle_from_json(json{{"name", "m"}, {"endpoint", "mock://x"}});
  EXPECT_EQ(h.max_attempts, 3);
  EXPECT_EQ(h.pacing.max_in_flight, 4);
  EXPECT_EQ(h.backoff.base, Millis(1000));
  EXPECT_DOUBLE_EQ(h.backoff.factor, 2.0);
  EXPECT_DOUBLE_EQ(h.backoff.jitter, 0.2);
  ASSERT_TRUE(h.temperature);
  EXPECT_EQ(*h.temperature, 0.0);
  EXPECT_THROW(handle_from_json(json{{"name", "m"}, {"endpoint", "mock://x"}, {"max_attempts", 0}}), ConfigError);
  EXPECT_THROW(handle_from_json(json{{"endpoint", "mock://x"}}), ConfigError);
  EXPECT_EQ(handle_from_json(to_json(h)).name, "m");
}

TEST(Gateway, HappyPathOneAttempt) {
  RunLog log;
  Gateway gw(log);
  auto t = std::make_shared<ScriptedTransport>([](std::string_view, int) {
    return ScriptedTransport::ok(R"({"sentiment":"Positive"})");
  });
  gw.bind("m", t);
  const auto ex = gw.complete(testsupport::handle("m"), "hello");
  EXPECT_EQ(ex.status, ExchangeStatus::ok);
  EXPECT_EQ(ex.attempts, 1);
  ASSERT_TRUE(ex.response_text);
  EXPECT_EQ(log.size(), 1u);
  EXPECT_EQ(ex.exchange_id, exchange_id("m", "hello"));
}

TEST(Gateway, FailsTwiceThenSucceeds) {
  RunLog log;
  Gateway gw(log);
  auto t = std::make_shared<ScriptedTransport>([](std::string_view, int call) {
    return call < 3 ? ScriptedTransport::fail() : ScriptedTransport::ok("{}");
  });
  gw.bind("m", t);
  const auto ex = gw.complete(testsupport::handle("m"), "p");
  EXPECT_EQ(ex.status, ExchangeStatus::ok);
  EXPECT_EQ(ex.attempts, 3);
  EXPECT_EQ(t->calls(), 3);
  EXPECT_EQ(log.size(), 1u);
}

TEST(Gateway, EmptyBodyEveryTimeIsRefusal) {
  RunLog log;
  Gateway gw(log);
  auto t = std::make_shared<ScriptedTransport>([](std::string_view, int) { return ScriptedTransport::ok("  \n"); });
  gw.bind("m", t);
  const auto ex = gw.complete(testsupport::handle("m"), "p");
  EXPECT_EQ(ex.status, ExchangeStatus::refusal_or_empty);
  EXPECT_FALSE(ex.response_text);
  EXPECT_EQ(ex.attempts, 3);
}

TEST(Gateway, AllAttemptsFailIsDataNotException) {
  RunLog log;
  Gateway gw(log);
  gw.bind("m", std::make_shared<ScriptedTransport>(
                   [](std::string_view, int) { return ScriptedTransport::fail(ExchangeStatus::timeout); }));
  auto h = testsupport::handle("m");
  h.max_attempts = 2;
  const auto ex = gw.complete(h, "p");
  EXPECT_EQ(ex.status, ExchangeStatus::timeout);
  EXPECT_EQ(ex.attempts, 2);
}

TEST(Gateway, MissingCredentialFailsBeforeAnyCall) {
  RunLog log;
  Gateway gw(log);
  auto t = std::make_shared<ScriptedTransport>([](std::string_view, int) { return ScriptedTransport::ok("{}"); });
  gw.bind("m", t);
  auto h = testsupport::handle("m");
  h.auth_ref = "SENTDIAG_TEST_SURELY_UNSET_VAR";
  ::unsetenv(h.auth_ref.c_str());
  EXPECT_THROW(gw.complete(h, "p"), ConfigError);
  EXPECT_EQ(t->calls(), 0);
  EXPECT_EQ(log.size(), 0u);
  EXPECT_THROW(gw.complete(testsupport::handle("m"), ""), PreconditionError);
}

TEST(Gateway, LogCountMatchesCallsUnderConcurrency) {
  RunLog log;
  Gateway gw(log);
  gw.bind("m", std::make_shared<ScriptedTransport>([](std::string_view p, int) {
            return std::hash<std::string_view>{}(p) % 3 == 0 ? ScriptedTransport::fail() : ScriptedTransport::ok("x");
          }));
  auto h = testsupport::handle("m");
  h.pacing.max_in_flight = 3;
  parallel_for(120, 6, [&](std::size_t i) { gw.complete(h, "prompt " + std::to_string(i)); });
  EXPECT_EQ(log.size(), 120u);
}

TEST(Gateway, PacingCapsInFlight) {
  RunLog log;
  Gateway gw(log);
  std::atomic<int> in_flight{0}, peak{0};
  gw.bind("m", std::make_shared<ScriptedTransport>([&](std::string_view, int) {
            const int now = ++in_flight;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            --in_flight;
            return ScriptedTransport::ok("x");
          }));
  auto h = testsupport::handle("m");
  h.pacing.max_in_flight = 2;
  parallel_for(16, 8, [&](std::size_t i) { gw.complete(h, "p" + std::to_string(i)); });
  EXPECT_LE(peak.load(), 2);
}

TEST(MockProvider, IdenticalPromptsIdenticalReplies) {
  RunLog log;
  Gateway gw(log);
  auto h = testsupport::handle("mocky", "mock://x");
  h.options = json{{"coverage", 0.5}};
  for (int i = 0; i < 20; ++i) {
    const auto prompt = "You are an NLP assistant for sentiment analysis.\nQUERY: \"poa sana " + std::to_string(i) + "\"\n";
    const auto a = gw.complete(h, prompt);
    const auto b = gw.complete(h, prompt);
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.response_text, b.response_text);
  }
}

TEST(MockProvider, ScriptTableByPromptHash) {
  testsupport::TempDir dir;
  const std::string prompt = "scripted prompt";
  const auto sha = sha256_hex(prompt);
  {
    std::ofstream out(dir / "script.json");
    json script;
    script["by_prompt_sha256"][sha] = json::array({json{{"status", "transport_error"}}, "second"});
    out << script.dump();
  }
  RunLog log;
  Gateway gw(log);
  auto h = testsupport::handle("s", "mock://x");
  h.options = json{{"script", (dir / "script.json").string()}};
  const auto ex = gw.complete(h, prompt);
  EXPECT_EQ(ex.status, ExchangeStatus::ok);
  EXPECT_EQ(ex.attempts, 2);
  EXPECT_EQ(*ex.response_text, "second");
}

TEST(Replay, ServesLoggedResponses) {
  testsupport::TempDir dir;
  const auto path = dir / "log.jsonl";
  {
    RunLog log(path);
    Gateway gw(log);
    gw.bind("m", std::make_shared<ScriptedTransport>(
                     [](std::string_view p, int) { return ScriptedTransport::ok("reply to " + std::string(p)); }));
    gw.complete(testsupport::handle("m"), "one");
    gw.complete(testsupport::handle("m"), "two");
  }
  RunLog log2;
  Gateway gw2(log2);
  const auto h = testsupport::handle("m", "replay://" + path.string());
  EXPECT_EQ(*gw2.complete(h, "two").response_text, "reply to two");
  EXPECT_EQ(*gw2.complete(h, "one").response_text, "reply to one");
  EXPECT_NE(gw2.complete(h, "three").status, ExchangeStatus::ok);
}

class LocalChatServer : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = json::parse(req.body);
      const auto content = last_body_["messages"][0]["content"].get<std::string>();
      if (content == "boom") {
        res.status = 500;
        return;
      }
      json choice{{"index", 0}, {"message", {{"role", "assistant"}}}};
      if (content == "refuse") {
        choice["message"]["refusal"] = "I can't help with that.";
        choice["message"]["content"] = nullptr;
      } else {
        choice["message"]["content"] = "echo: " + content;
      }
      res.set_content(json{{"choices", json::array({choice})}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  ModelHandle http_handle() {
    auto h = testsupport::handle("gpt-test", "http://127.0.0.1:" + std::to_string(port_));
    h.auth_ref = "SENTDIAG_TEST_KEY";
    h.max_attempts = 2;
    return h;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::string last_auth_;
  json last_body_;
};

TEST_F(LocalChatServer, OkExchangeCarriesBearerAndZeroTemperature) {
  ::setenv("SENTDIAG_TEST_KEY", "sk-secret-value", 1);
  RunLog log;
  Gateway gw(log);
  const auto ex = gw.complete(http_handle(), "habari");
  EXPECT_EQ(ex.status, ExchangeStatus::ok);
  EXPECT_EQ(*ex.response_text, "echo: habari");
  EXPECT_EQ(last_auth_, "Bearer sk-secret-value");
  EXPECT_EQ(last_body_["temperature"], 0.0);
  EXPECT_EQ(last_body_["model"], "gpt-test");
  for (const auto& e : log.entries()) EXPECT_EQ(e.dump().find("sk-secret-value"), std::string::npos);
}

TEST_F(LocalChatServer, ServerErrorAndRefusal) {
  ::setenv("SENTDIAG_TEST_KEY", "k", 1);
  RunLog log;
  Gateway gw(log);
  const auto bad = gw.complete(http_handle(), "boom");
  EXPECT_EQ(bad.status, ExchangeStatus::transport_error);
  EXPECT_EQ(bad.attempts, 2);
  EXPECT_EQ(gw.complete(http_handle(), "refuse").status, ExchangeStatus::refusal_or_empty);
}

TEST(HttpTransport, UnreachableEndpointIsTransportFailure) {
  RunLog log;
  Gateway gw(log);
  auto h = testsupport::handle("x", "http://127.0.0.1:1");
  h.max_attempts = 1;
  h.timeout = Millis(500);
  const auto ex = gw.complete(h, "p");
  EXPECT_NE(ex.status, ExchangeStatus::ok);
  EXPECT_EQ(log.size(), 1u);
}
