#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cnalign/http_endpoint.hpp"

namespace cnalign {

struct DecodeOptions {
  double temperature = 1.0;
  int max_tokens = 256;
};

struct GenerationRequest {
  std::string text;
  std::string tag;  // example id, forwarded for tracing and stub lookup
  DecodeOptions options;
};

/// Text generator used to synthesize rejected responses. Implementations
/// throw TransportError on endpoint failures and must be safe to call from
/// several threads.
class GeneratorClient {
 public:
  virtual ~GeneratorClient() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
  /// Provider/model label, part of the response-cache key.
  virtual std::string identity() const = 0;
};

/// Replays canned responses. Each tag owns a response sequence consumed one
/// entry per call; the last entry repeats once the sequence is exhausted.
/// Tags without an entry fall back to the "*" sequence.
class StubGeneratorClient final : public GeneratorClient {
 public:
  explicit StubGeneratorClient(std::map<std::string, std::vector<std::string>> responses,
                               std::string label = "canned");

  /// Line-delimited {"id": ..., "responses": [...]} rows.
  static std::unique_ptr<StubGeneratorClient> from_file(const std::filesystem::path& path, std::string label = "canned");

  std::string generate(const GenerationRequest& request) override;
  std::string identity() const override { return "stub:" + label_; }

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::map<std::string, std::vector<std::string>> responses_;
  std::map<std::string, std::size_t> cursor_;
  std::string label_;
  std::mutex mutex_;
  std::atomic<std::size_t> calls_{0};
};

class FunctionGeneratorClient final : public GeneratorClient {
 public:
  using Fn = std::function<std::string(const GenerationRequest&)>;
  FunctionGeneratorClient(Fn fn, std::string identity) : fn_(std::move(fn)), identity_(std::move(identity)) {}

  std::string generate(const GenerationRequest& request) override {
    ++calls_;
    return fn_(request);
  }
  std::string identity() const override { return identity_; }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Fn fn_;
  std::string identity_;
  std::atomic<std::size_t> calls_{0};
};

/// Chat-completion endpoint adapter (OpenAI-compatible wire format).
class HttpGeneratorClient final : public GeneratorClient {
 public:
  explicit HttpGeneratorClient(EndpointSettings settings);

  std::string generate(const GenerationRequest& request) override;
  std::string identity() const override;

 private:
  std::unique_ptr<JsonEndpoint> endpoint_;
};

}  // namespace cnalign
