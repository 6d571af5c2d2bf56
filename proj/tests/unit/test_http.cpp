#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cnalign/embedding.hpp"
#include "cnalign/errors.hpp"
#include "cnalign/generator.hpp"
#include "cnalign/judge.hpp"

using namespace cnalign;
using nlohmann::json;

namespace {

// OpenAI-compatible fake serving chat completions and embeddings on localhost.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++chat_calls;
      last_auth = req.get_header_value("Authorization");
      if (fail_first > 0) {
        --fail_first;
        res.status = 503;
        return;
      }
      if (unauthorized) {
        res.status = 401;
        return;
      }
      const auto body = json::parse(req.body);
      last_model = body.at("model").get<std::string>();
      last_prompt = body.at("messages").at(0).at("content").get<std::string>();
      json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", chat_reply}}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      json data = json::array();
      for (const auto& token : body.at("input")) {
        const double len = static_cast<double>(token.get<std::string>().size());
        data.push_back({{"embedding", {len, 1.0}}});
      }
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  EndpointSettings settings(const std::string& path) const {
    EndpointSettings s;
    s.url = "http://127.0.0.1:" + std::to_string(port_) + path;
    s.model = "fake-model";
    s.api_key_env = "CNALIGN_TEST_KEY";
    s.timeout = std::chrono::milliseconds(5000);
    s.retry_backoff = std::chrono::milliseconds(1);
    return s;
  }

  std::atomic<int> chat_calls{0};
  std::atomic<int> fail_first{0};
  std::atomic<bool> unauthorized{false};
  std::string chat_reply = "A";
  std::string last_auth, last_model, last_prompt;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("generator adapter speaks the chat format and sends the bearer key") {
  setenv("CNALIGN_TEST_KEY", "secret-123", 1);
  FakeServer server;
  server.chat_reply = "a rejected reply";
  HttpGeneratorClient client(server.settings("/v1/chat/completions"));
  CHECK(client.identity() == "http:fake-model");
  CHECK(client.generate({"prompt text", "id-1", {}}) == "a rejected reply");
  CHECK(server.last_auth == "Bearer secret-123");
  CHECK(server.last_prompt == "prompt text");
  CHECK(server.last_model == "fake-model");
  unsetenv("CNALIGN_TEST_KEY");
}

TEST_CASE("transient failures are retried, permanent ones surface") {
  FakeServer server;
  server.fail_first = 2;
  auto settings = server.settings("/v1/chat/completions");
  settings.transport_retries = 3;
  HttpGeneratorClient client(settings);
  CHECK(client.generate({"x", "id", {}}) == "A");
  CHECK(server.chat_calls == 3);

  server.unauthorized = true;
  CHECK_THROWS_AS(client.generate({"x", "id", {}}), TransportError);
  CHECK(server.chat_calls == 4);

  settings.url = "http://127.0.0.1:1/v1/chat/completions";
  settings.transport_retries = 1;
  CHECK_THROWS_AS(HttpGeneratorClient(settings).generate({"x", "id", {}}), TransportError);
}

TEST_CASE("judge adapter parses verdicts") {
  FakeServer server;
  HttpJudgeClient judge(server.settings("/v1/chat/completions"));
  server.chat_reply = "B";
  CHECK(judge.compare("hs", "kn", "first", "second") == Verdict::B);
  CHECK(server.last_prompt.find("first") != std::string::npos);
  server.chat_reply = "I cannot decide";
  CHECK_THROWS_AS(judge.compare("hs", "kn", "a", "b"), TransportError);
}

TEST_CASE("embedding adapter returns normalised vectors") {
  FakeServer server;
  HttpEmbeddingBackend emb(server.settings("/v1/embeddings"));
  const auto vectors = emb.embed({"ab", "abcd"});
  REQUIRE(vectors.size() == 2);
  CHECK(vectors[0][0] == doctest::Approx(2.0 / std::sqrt(5.0)));
  CHECK(vectors[1][1] == doctest::Approx(1.0 / std::sqrt(17.0)));
}

TEST_CASE("malformed endpoint urls are configuration errors") {
  EndpointSettings s;
  s.url = "not a url";
  CHECK_THROWS_AS(HttpGeneratorClient{s}, ConfigError);
}
