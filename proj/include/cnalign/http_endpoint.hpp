#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

namespace cnalign {

/// Connection settings for a hosted JSON endpoint (chat completion,
/// embeddings). Credentials are never stored here, only the name of the
/// environment variable that holds them.
struct EndpointSettings {
  std::string url;  // e.g. https://api.openai.com/v1/chat/completions
  std::string model;
  std::string api_key_env;
  double temperature = 1.0;
  int max_tokens = 256;
  std::chrono::milliseconds timeout{60000};
  int transport_retries = 3;
  std::chrono::milliseconds retry_backoff{500};
  double requests_per_second = 0.0;  // 0 disables client-side throttling
};

/// POSTs JSON bodies with bearer auth, client-side throttling and retries on
/// 429/5xx/network errors. Throws TransportError once retries run out.
class JsonEndpoint {
 public:
  explicit JsonEndpoint(EndpointSettings settings);
  ~JsonEndpoint();
  JsonEndpoint(const JsonEndpoint&) = delete;
  JsonEndpoint& operator=(const JsonEndpoint&) = delete;

  nlohmann::json post(const nlohmann::json& body);
  const EndpointSettings& settings() const noexcept { return settings_; }

 private:
  void throttle();

  EndpointSettings settings_;
  std::string origin_;
  std::string path_;
  std::string api_key_;
  std::mutex throttle_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Single-turn chat completion; returns choices[0].message.content.
std::string chat_completion(JsonEndpoint& endpoint, std::string_view user_message,
                            double temperature, int max_tokens);

}  // namespace cnalign
