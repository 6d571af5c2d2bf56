#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cnalign/backend.hpp"

namespace cnalign {

struct ToyBackendOptions {
  int adapter_rank = 0;       // 0 trains the full logit table
  double adapter_scale = 16;  // adapter delta is scaled by adapter_scale / adapter_rank
  double adapter_dropout = 0; // only 0 is supported by this backend
  double adapter_init_std = 0.02;
  double base_init_std = 0.0;
  std::uint64_t seed = 0;
};

/// Word-level bigram language model with a small vocabulary, used to test
/// the training pipeline end to end.
///
/// next-token logits for context token p are
///   base[p] + (adapter_scale / rank) * A[p] . B
/// with A (V x r) and B (r x V). With rank 0 the base table itself is
/// trainable. Token 0 is "<unk>" and also conditions the first token when
/// the prompt is empty. Special markers ("<end_of_text>", "<|eot_id|>", ...)
/// are split out of surrounding text and form single tokens.
class ToyBigramBackend final : public ModelBackend {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  ToyBigramBackend(std::vector<std::string> vocabulary, ToyBackendOptions options = {});

  /// Most frequent tokens of texts, at most max_size including "<unk>" and
  /// both terminator markers. Ties break lexicographically.
  static std::vector<std::string> build_vocabulary(const std::vector<std::string>& texts,
                                                   std::size_t max_size);

  /// Splits text into toy tokens (whitespace, then special markers).
  static std::vector<std::string> pretokenize(std::string_view text);

  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  std::optional<TokenId> marker_id(std::string_view marker) const override;
  std::size_t vocab_size() const override { return vocab_.size(); }

  std::vector<double> score(std::span<const TokenId> prompt,
                            std::span<const TokenId> completion) const override;
  std::vector<double> next_token_logprobs(std::span<const TokenId> context) const override;

  std::span<const double> parameters() const override;
  std::span<const double> gradient() const override { return gradient_; }

  std::unique_ptr<ModelBackend> clone() const override;

  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }
  const ToyBackendOptions& options() const noexcept { return options_; }

  /// Effective logit, base plus adapter delta.
  double logit(TokenId context, TokenId next) const;
  /// Overwrites base table entries (for building fixtures); the backend
  /// must not be frozen.
  void set_base_logit(TokenId context, TokenId next, double value);

  void save(const std::filesystem::path& path) const;
  static ToyBigramBackend load(const std::filesystem::path& path);

 protected:
  void do_accumulate_gradient(std::span<const TokenId> prompt, std::span<const TokenId> completion,
                              std::span<const double> upstream) override;
  std::span<double> trainable_parameters() override;
  std::span<double> gradient_buffer() override { return gradient_; }

 private:
  std::vector<double> row_logits(TokenId context) const;
  std::vector<double> row_logprobs(TokenId context) const;
  std::size_t index(TokenId context, TokenId next) const {
    return static_cast<std::size_t>(context) * vocab_.size() + static_cast<std::size_t>(next);
  }
  double adapter_factor() const;

  std::vector<std::string> vocab_;
  std::map<std::string, TokenId, std::less<>> ids_;
  ToyBackendOptions options_;
  std::vector<double> base_;     // V x V
  std::vector<double> adapter_;  // A (V x r) followed by B (r x V)
  std::vector<double> gradient_;
};

}  // namespace cnalign
