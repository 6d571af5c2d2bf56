#include "cnalign/http_endpoint.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "cnalign/errors.hpp"

namespace cnalign {

namespace {

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

JsonEndpoint::JsonEndpoint(EndpointSettings settings) : settings_(std::move(settings)) {
  const std::string& url = settings_.url;
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint.url", "expected scheme://host/path");
  const std::size_t path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (!settings_.api_key_env.empty()) {
    if (const char* key = std::getenv(settings_.api_key_env.c_str())) api_key_ = key;
  }
}

JsonEndpoint::~JsonEndpoint() = default;

void JsonEndpoint::throttle() {
  if (settings_.requests_per_second <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / settings_.requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(throttle_mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

nlohmann::json JsonEndpoint::post(const nlohmann::json& body) {
  httplib::Client client(origin_);
  const auto timeout = settings_.timeout;
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                0);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const std::string payload = body.dump();
  std::string last_error = "no attempt made";
  auto backoff = settings_.retry_backoff;
  for (int attempt = 0; attempt <= settings_.transport_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    throttle();
    auto result = client.Post(path_, headers, payload, "application/json");
    if (!result) {
      last_error = httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 200 && result->status < 300) {
      try {
        return nlohmann::json::parse(result->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw TransportError(settings_.url, std::string("unparseable response: ") + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(result->status);
    if (!retryable(result->status)) break;
  }
  throw TransportError(settings_.url, last_error);
}

std::string chat_completion(JsonEndpoint& endpoint, std::string_view user_message,
                            double temperature, int max_tokens) {
  nlohmann::json body = {
      {"model", endpoint.settings().model},
      {"temperature", temperature},
      {"max_tokens", max_tokens},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", user_message}}})},
  };
  const nlohmann::json reply = endpoint.post(body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(endpoint.settings().url, std::string("unexpected response shape: ") + e.what());
  }
}

}  // namespace cnalign
