#include "cnalign/generator.hpp"

#include <fstream>

#include <json.hpp>

#include "cnalign/errors.hpp"
#include "cnalign/text.hpp"

namespace cnalign {

StubGeneratorClient::StubGeneratorClient(std::map<std::string, std::vector<std::string>> responses,
                                         std::string label)
    : responses_(std::move(responses)), label_(std::move(label)) {}

std::unique_ptr<StubGeneratorClient> StubGeneratorClient::from_file(const std::filesystem::path& path, std::string label) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open stub responses");
  std::map<std::string, std::vector<std::string>> responses;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      responses[row.at("id").get<std::string>()] = row.at("responses").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(number, "responses", e.what());
    }
  }
  return std::make_unique<StubGeneratorClient>(std::move(responses), std::move(label));
}

std::string StubGeneratorClient::generate(const GenerationRequest& request) {
  ++calls_;
  std::lock_guard lock(mutex_);
  auto it = responses_.find(request.tag);
  if (it == responses_.end()) it = responses_.find("*");
  if (it == responses_.end() || it->second.empty()) {
    throw TransportError(identity(), "no canned response for '" + request.tag + "'");
  }
  std::size_t& cursor = cursor_[it->first];
  const std::string& out = it->second[std::min(cursor, it->second.size() - 1)];
  ++cursor;
  return out;
}

HttpGeneratorClient::HttpGeneratorClient(EndpointSettings settings)
    : endpoint_(std::make_unique<JsonEndpoint>(std::move(settings))) {}

std::string HttpGeneratorClient::generate(const GenerationRequest& request) {
  return chat_completion(*endpoint_, request.text, request.options.temperature,
                         request.options.max_tokens);
}

std::string HttpGeneratorClient::identity() const { return "http:" + endpoint_->settings().model; }

}  // namespace cnalign
