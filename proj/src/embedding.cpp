#include "cnalign/embedding.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "cnalign/errors.hpp"

namespace cnalign {

Vector normalized(Vector v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw std::invalid_argument("cannot normalize a zero vector");
  for (double& x : v) x /= norm;
  return v;
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

HashedEmbedding::HashedEmbedding(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw ConfigError("embedding.dimension", "must be positive");
}

std::vector<Vector> HashedEmbedding::embed(const std::vector<std::string>& tokens) const {
  std::vector<Vector> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) {
    std::mt19937_64 rng(fnv1a(token, seed_));
    Vector v(dimension_);
    // Uniform in [-1, 1).
    for (double& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
    out.push_back(normalized(std::move(v)));
  }
  return out;
}

TableEmbedding::TableEmbedding(std::map<std::string, Vector> table) {
  for (auto& [token, v] : table) table_.emplace(token, normalized(std::move(v)));
}

std::vector<Vector> TableEmbedding::embed(const std::vector<std::string>& tokens) const {
  std::vector<Vector> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) out.push_back(table_.at(token));
  return out;
}

OneHotEmbedding::OneHotEmbedding(std::vector<std::string> vocabulary) {
  for (auto& token : vocabulary) index_.emplace(std::move(token), index_.size());
}

std::vector<Vector> OneHotEmbedding::embed(const std::vector<std::string>& tokens) const {
  std::vector<Vector> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) {
    Vector v(index_.size(), 0.0);
    v[index_.at(token)] = 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(EndpointSettings settings)
    : endpoint_(std::make_unique<JsonEndpoint>(std::move(settings))) {}

std::vector<Vector> HttpEmbeddingBackend::embed(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) return {};
  const nlohmann::json body = {{"model", endpoint_->settings().model}, {"input", tokens}};
  const nlohmann::json reply = endpoint_->post(body);
  std::vector<Vector> out;
  try {
    const auto& data = reply.at("data");
    if (data.size() != tokens.size()) {
      throw TransportError(endpoint_->settings().url, "embedding count does not match token count");
    }
    for (const auto& item : data) out.push_back(normalized(item.at("embedding").get<Vector>()));
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(endpoint_->settings().url, std::string("unexpected response shape: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw TransportError(endpoint_->settings().url, e.what());
  }
  return out;
}

}  // namespace cnalign
