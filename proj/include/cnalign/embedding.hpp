#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cnalign/http_endpoint.hpp"

namespace cnalign {

using Vector = std::vector<double>;

/// Contextual token embeddings: one unit-norm vector per input token.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<Vector> embed(const std::vector<std::string>& tokens) const = 0;
};

/// Rescales to unit length; throws std::invalid_argument on a zero vector.
Vector normalized(Vector v);

/// Deterministic pseudo-random unit vector per token string.
class HashedEmbedding final : public EmbeddingBackend {
 public:
  explicit HashedEmbedding(std::size_t dimension = 64, std::uint64_t seed = 0);
  std::vector<Vector> embed(const std::vector<std::string>& tokens) const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

/// Fixed token -> vector table (vectors are normalized on construction).
/// Unknown tokens throw std::out_of_range.
class TableEmbedding final : public EmbeddingBackend {
 public:
  explicit TableEmbedding(std::map<std::string, Vector> table);
  std::vector<Vector> embed(const std::vector<std::string>& tokens) const override;

 private:
  std::map<std::string, Vector> table_;
};

/// Identity embedding: each vocabulary token is its own basis vector, so
/// cosine similarity is 1 for equal tokens and 0 otherwise.
class OneHotEmbedding final : public EmbeddingBackend {
 public:
  explicit OneHotEmbedding(std::vector<std::string> vocabulary);
  std::vector<Vector> embed(const std::vector<std::string>& tokens) const override;

 private:
  std::map<std::string, std::size_t> index_;
};

/// Embeddings endpoint adapter: POST {"model", "input": [tokens]} and read
/// data[i].embedding.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(EndpointSettings settings);
  std::vector<Vector> embed(const std::vector<std::string>& tokens) const override;

 private:
  std::unique_ptr<JsonEndpoint> endpoint_;
};

}  // namespace cnalign
