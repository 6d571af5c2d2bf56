#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cnalign {

using TokenId = std::int32_t;

class AdamW;

/// Trainable parameter values captured at one point of training.
struct BackendSnapshot {
  std::vector<double> parameters;
};

/// Seam between the training pipeline and a concrete language model.
///
/// score() returns one log-probability (<= 0, finite) per completion token
/// conditioned on the prompt and the preceding completion tokens. Gradients
/// are pushed in as dLoss/dlogprob per completion token and accumulated over
/// the trainable parameters until apply_update() consumes them. A frozen
/// backend rejects every mutation, so its scores never change.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const TokenId> tokens) const = 0;
  /// Id of a special marker such as "<end_of_text>", if the vocabulary has it.
  virtual std::optional<TokenId> marker_id(std::string_view marker) const = 0;
  virtual std::size_t vocab_size() const = 0;

  virtual std::vector<double> score(std::span<const TokenId> prompt,
                                    std::span<const TokenId> completion) const = 0;
  /// Log-probabilities over the whole vocabulary for the next token.
  virtual std::vector<double> next_token_logprobs(std::span<const TokenId> context) const = 0;

  void accumulate_gradient(std::span<const TokenId> prompt, std::span<const TokenId> completion,
                           std::span<const double> upstream);
  virtual std::span<const double> parameters() const = 0;
  virtual std::span<const double> gradient() const = 0;
  void zero_gradient();

  /// Applies one optimizer step with the accumulated gradient, then clears it.
  void apply_update(AdamW& optimizer);

  BackendSnapshot snapshot() const;
  void restore(const BackendSnapshot& snapshot);

  /// Independent copy with equal parameters; the copy is not frozen.
  virtual std::unique_ptr<ModelBackend> clone() const = 0;

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  /// Direct parameter access for finite-difference checks and restore.
  std::span<double> mutable_parameters();

 protected:
  ModelBackend() = default;
  ModelBackend(const ModelBackend&) = default;
  ModelBackend& operator=(const ModelBackend&) = default;

  void clear_frozen() noexcept { frozen_ = false; }

  virtual void do_accumulate_gradient(std::span<const TokenId> prompt,
                                      std::span<const TokenId> completion,
                                      std::span<const double> upstream) = 0;
  virtual std::span<double> trainable_parameters() = 0;
  virtual std::span<double> gradient_buffer() = 0;

 private:
  void ensure_mutable(const char* operation) const;

  bool frozen_ = false;
};

}  // namespace cnalign
