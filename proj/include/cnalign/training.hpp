#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cnalign/backend.hpp"
#include "cnalign/losses.hpp"
#include "cnalign/preference.hpp"
#include "cnalign/prompting.hpp"

namespace cnalign {

struct AdamMoments {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct SftConfig {
  double learning_rate = 2e-4;
  int epochs = 500;
  int batch_size = 4;
  int gradient_accumulation_steps = 4;
  double weight_decay = 0.01;
  int adapter_rank = 16;
  double adapter_scale = 16;
  double adapter_dropout = 0.0;
  int max_sequence_length = 640;
  int checkpoint_every = 50;
  std::uint64_t seed = 42;
  AdamMoments adam;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct DpoConfig {
  double learning_rate = 5e-4;
  int epochs = 80;
  double beta = 0.1;
  int batch_size = 4;
  int gradient_accumulation_steps = 4;
  double weight_decay = 0.01;
  int max_sequence_length = 640;
  int checkpoint_every = 10;
  std::uint64_t seed = 42;
  AdamMoments adam;

  void validate() const;
};

enum class Stage { Sft, Dpo };
std::string to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct CheckpointRecord {
  Stage stage = Stage::Sft;
  int epoch = 0;
  /// Validation statistics keyed by metric name ("loss", "rouge_l",
  /// "reward_accuracy", ...) plus "train_loss" for the epoch.
  std::map<std::string, double> scores;
  std::shared_ptr<const BackendSnapshot> snapshot;
  std::string snapshot_path;

  /// Throws ConfigError when the criterion was not recorded.
  double validation_score(const std::string& criterion) const;
};

struct TrainingRun {
  std::vector<CheckpointRecord> checkpoints;
  std::vector<double> epoch_losses;  // mean training loss per epoch
  std::int64_t updates = 0;
};

struct TrainHooks {
  /// Extra validation metrics computed on the backend at each checkpoint.
  std::function<std::map<std::string, double>(const ModelBackend&)> validator;
  /// Persists the checkpoint; returns the snapshot path to record.
  std::function<std::string(const ModelBackend&, const CheckpointRecord&)> sink;
};

/// Prompt/completion token pair capped at max_length tokens in total. The
/// completion is cut from the end first; an over-long prompt keeps its
/// last max_length - 1 tokens.
struct EncodedSequence {
  std::vector<TokenId> prompt;
  std::vector<TokenId> completion;
};
EncodedSequence encode_truncated(const ModelBackend& backend, std::string_view prompt,
                                 std::string_view completion, int max_length);

/// Adam updates on batched sft_loss with gradient accumulation. A checkpoint
/// is emitted after every checkpoint_every-th epoch with the validation loss
/// under "loss" when validation is non-empty. Throws NonFiniteLoss.
TrainingRun train_sft(ModelBackend& backend, const std::vector<RenderedExample>& train,
                      const std::vector<RenderedExample>& validation, const SftConfig& config,
                      const TrainHooks& hooks = {});

/// Mean DPO statistics of the policy against the reference over pairs.
LossStats evaluate_dpo(const ModelBackend& policy, const ModelBackend& reference,
                       const std::vector<PreferencePair>& pairs, double beta, int max_sequence_length);

/// DPO on summed completion log-probabilities; only the policy is updated.
/// The reference must be frozen. Checkpoints carry "loss", "margin" and
/// "reward_accuracy" on the validation pairs (training pairs when none are
/// given). Throws ReferenceMutated if reference scores drift.
TrainingRun train_dpo(ModelBackend& policy, const ModelBackend& reference,
                      const std::vector<PreferencePair>& pairs,
                      const std::vector<PreferencePair>& validation, const DpoConfig& config,
                      const TrainHooks& hooks = {});

/// Lower is better for "loss" and any criterion ending in "loss"; higher for
/// everything else. Ties go to the earliest epoch. Throws NoCheckpoints.
const CheckpointRecord& select_checkpoint(const std::vector<CheckpointRecord>& checkpoints,
                                          const std::string& criterion);

/// One JSON line per checkpoint: stage, epoch, criterion, score, snapshot, scores.
void write_checkpoint_manifest(const std::filesystem::path& path,
                               const std::vector<CheckpointRecord>& checkpoints,
                               const std::string& criterion);

struct GenerationOptions {
  int max_new_tokens = -1;  // negative: bounded only by max_sequence_length
  int max_sequence_length = 640;
  bool greedy = true;       // argmax, lowest id on ties
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// Continues the rendered prompt until the style terminator or the length
/// budget, then extracts the counter narrative.
std::string generate_cn(const ModelBackend& backend, const ExampleRecord& example, PromptStyle style,
                        const GenerationOptions& options = {});

}  // namespace cnalign
