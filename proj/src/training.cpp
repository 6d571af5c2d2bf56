#include "cnalign/training.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "cnalign/errors.hpp"
#include "cnalign/optimizer.hpp"

namespace cnalign {

namespace {

void require(bool ok, const char* field, const char* detail) {
  if (!ok) throw ConfigError(field, detail);
}

void validate_common(double lr, int epochs, int batch, int accum, double wd, int max_len,
                     int checkpoint_every, const AdamMoments& adam) {
  require(lr > 0, "learning_rate", "must be positive");
  require(epochs >= 0, "epochs", "must be non-negative");
  require(batch >= 1, "batch_size", "must be positive");
  require(accum >= 1, "gradient_accumulation_steps", "must be positive");
  require(wd >= 0, "weight_decay", "must be non-negative");
  require(max_len >= 1, "max_sequence_length", "must be at least 1");
  require(checkpoint_every >= 1, "checkpoint_every", "must be positive");
  require(adam.beta1 >= 0 && adam.beta1 < 1, "adam.beta1", "must be in [0,1)");
  require(adam.beta2 >= 0 && adam.beta2 < 1, "adam.beta2", "must be in [0,1)");
  require(adam.epsilon > 0, "adam.epsilon", "must be positive");
}

AdamSettings adam_settings(double lr, double wd, const AdamMoments& m) {
  return AdamSettings{lr, m.beta1, m.beta2, m.epsilon, wd};
}

// Deterministic Fisher-Yates; std::shuffle's draw sequence is unspecified.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Batches of batch_size examples; an optimizer update every accum batches
// (and at the end of the epoch).
struct Schedule {
  std::size_t batch_size;
  std::size_t accum;
};

template <typename MicroBatchFn>
double run_epoch(ModelBackend& backend, AdamW& optimizer, std::vector<std::size_t>& order,
                 std::mt19937_64& rng, Schedule schedule, std::int64_t& updates,
                 MicroBatchFn&& micro_batch) {
  shuffle_indices(order, rng);
  const std::size_t n = order.size();
  const std::size_t micro_count = (n + schedule.batch_size - 1) / schedule.batch_size;
  double loss_sum = 0.0;
  std::size_t micro = 0;
  while (micro < micro_count) {
    const std::size_t group = std::min(schedule.accum, micro_count - micro);
    for (std::size_t g = 0; g < group; ++g, ++micro) {
      const std::size_t begin = micro * schedule.batch_size;
      const std::size_t end = std::min(begin + schedule.batch_size, n);
      std::span<const std::size_t> batch(order.data() + begin, end - begin);
      // Each example contributes loss / (batch size * micro batches per update).
      const double weight = 1.0 / static_cast<double>(batch.size() * group);
      loss_sum += micro_batch(batch, weight, micro);
    }
    backend.apply_update(optimizer);
    ++updates;
  }
  return n ? loss_sum / static_cast<double>(n) : 0.0;
}

}  // namespace

void SftConfig::validate() const {
  validate_common(learning_rate, epochs, batch_size, gradient_accumulation_steps, weight_decay,
                  max_sequence_length, checkpoint_every, adam);
  require(adapter_rank >= 1, "adapter_rank", "must be positive");
  require(adapter_scale > 0, "adapter_scale", "must be positive");
  require(adapter_dropout >= 0 && adapter_dropout < 1, "adapter_dropout", "must be in [0,1)");
}

void DpoConfig::validate() const {
  validate_common(learning_rate, epochs, batch_size, gradient_accumulation_steps, weight_decay,
                  max_sequence_length, checkpoint_every, adam);
  if (!(beta > 0)) throw NonPositiveBeta(beta);
}

std::string to_string(Stage stage) { return stage == Stage::Sft ? "sft" : "dpo"; }

Stage parse_stage(std::string_view name) {
  if (name == "sft") return Stage::Sft;
  if (name == "dpo") return Stage::Dpo;
  throw ConfigError("stage", "expected sft or dpo, got '" + std::string(name) + "'");
}

double CheckpointRecord::validation_score(const std::string& criterion) const {
  auto it = scores.find(criterion);
  if (it == scores.end()) {
    throw ConfigError(criterion, "checkpoint at epoch " + std::to_string(epoch) + " has no such score");
  }
  return it->second;
}

EncodedSequence encode_truncated(const ModelBackend& backend, std::string_view prompt,
                                 std::string_view completion, int max_length) {
  EncodedSequence seq{backend.encode(prompt), backend.encode(completion)};
  const std::size_t cap = static_cast<std::size_t>(std::max(max_length, 1));
  if (seq.prompt.size() + seq.completion.size() <= cap) return seq;
  if (seq.prompt.size() >= cap) {
    seq.prompt.erase(seq.prompt.begin(), seq.prompt.end() - static_cast<std::ptrdiff_t>(cap - 1));
  }
  seq.completion.resize(std::min(seq.completion.size(), cap - seq.prompt.size()));
  return seq;
}

namespace {

std::vector<EncodedSequence> encode_all(const ModelBackend& backend,
                                        const std::vector<RenderedExample>& examples, int max_length) {
  std::vector<EncodedSequence> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    auto seq = encode_truncated(backend, e.prompt_text, e.target_text, max_length);
    if (seq.completion.empty()) {
      throw BackendFailure(e.source_id, "completion is empty after truncation");
    }
    out.push_back(std::move(seq));
  }
  return out;
}

double mean_sft_loss(const ModelBackend& backend, const std::vector<EncodedSequence>& data) {
  double total = 0.0;
  for (const auto& seq : data) total += sft_loss(backend.score(seq.prompt, seq.completion));
  return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

CheckpointRecord emit_checkpoint(ModelBackend& backend, Stage stage, int epoch,
                                 std::map<std::string, double> scores, const TrainHooks& hooks) {
  CheckpointRecord record;
  record.stage = stage;
  record.epoch = epoch;
  record.scores = std::move(scores);
  if (hooks.validator) {
    for (auto& [name, value] : hooks.validator(backend)) record.scores[name] = value;
  }
  record.snapshot = std::make_shared<const BackendSnapshot>(backend.snapshot());
  if (hooks.sink) record.snapshot_path = hooks.sink(backend, record);
  return record;
}

}  // namespace

TrainingRun train_sft(ModelBackend& backend, const std::vector<RenderedExample>& train,
                      const std::vector<RenderedExample>& validation, const SftConfig& config,
                      const TrainHooks& hooks) {
  config.validate();
  TrainingRun run;
  if (config.epochs == 0 || train.empty()) return run;
  if (backend.frozen()) throw BackendFailure("train_sft", "backend is frozen");

  const auto train_data = encode_all(backend, train, config.max_sequence_length);
  const auto valid_data = encode_all(backend, validation, config.max_sequence_length);

  AdamW optimizer(adam_settings(config.learning_rate, config.weight_decay, config.adam));
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const Schedule schedule{static_cast<std::size_t>(config.batch_size),
                          static_cast<std::size_t>(config.gradient_accumulation_steps)};
  backend.zero_gradient();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto micro_batch = [&](std::span<const std::size_t> batch, double weight, std::size_t micro) {
      double batch_loss = 0.0;
      for (std::size_t i : batch) {
        const auto& seq = train_data[i];
        const auto logprobs = backend.score(seq.prompt, seq.completion);
        const double loss = sft_loss(logprobs);
        if (!std::isfinite(loss) || !all_finite(logprobs)) {
          throw NonFiniteLoss("sft epoch " + std::to_string(epoch) + " batch " + std::to_string(micro));
        }
        const TokenMask mask(logprobs.size(), 1);
        auto upstream = sft_loss_gradient(logprobs, mask);
        for (double& u : upstream) u *= weight;
        backend.accumulate_gradient(seq.prompt, seq.completion, upstream);
        batch_loss += loss;
      }
      return batch_loss;
    };
    run.epoch_losses.push_back(
        run_epoch(backend, optimizer, order, rng, schedule, run.updates, micro_batch));

    if (epoch % config.checkpoint_every == 0) {
      std::map<std::string, double> scores{{"train_loss", run.epoch_losses.back()}};
      if (!valid_data.empty()) scores["loss"] = mean_sft_loss(backend, valid_data);
      run.checkpoints.push_back(emit_checkpoint(backend, Stage::Sft, epoch, std::move(scores), hooks));
    }
  }
  return run;
}

namespace {

struct EncodedPair {
  std::string id;
  EncodedSequence chosen;
  EncodedSequence rejected;
};

std::vector<EncodedPair> encode_pairs(const ModelBackend& backend,
                                      const std::vector<PreferencePair>& pairs, int max_length) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back(EncodedPair{
        p.source_id,
        encode_truncated(backend, p.prompt_text, render_target(p.style, p.chosen), max_length),
        encode_truncated(backend, p.prompt_text, render_target(p.style, p.rejected), max_length)});
  }
  return out;
}

struct SequenceScores {
  double chosen;
  double rejected;
};

SequenceScores summed_scores(const ModelBackend& backend, const EncodedPair& pair) {
  return {sum(backend.score(pair.chosen.prompt, pair.chosen.completion)),
          sum(backend.score(pair.rejected.prompt, pair.rejected.completion))};
}

LossStats mean_stats(const ModelBackend& policy, const std::vector<EncodedPair>& pairs,
                     const std::vector<SequenceScores>& reference, double beta) {
  LossStats total;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto pol = summed_scores(policy, pairs[i]);
    const auto s = dpo_loss(pol.chosen, pol.rejected, reference[i].chosen, reference[i].rejected, beta);
    total.loss += s.loss;
    total.margin += s.margin;
    total.reward_accuracy += s.reward_accuracy;
  }
  if (!pairs.empty()) {
    const double n = static_cast<double>(pairs.size());
    total.loss /= n;
    total.margin /= n;
    total.reward_accuracy /= n;
  }
  return total;
}

std::vector<SequenceScores> reference_scores(const ModelBackend& reference,
                                             const std::vector<EncodedPair>& pairs) {
  std::vector<SequenceScores> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(summed_scores(reference, p));
  return out;
}

}  // namespace

LossStats evaluate_dpo(const ModelBackend& policy, const ModelBackend& reference,
                       const std::vector<PreferencePair>& pairs, double beta, int max_sequence_length) {
  const auto encoded = encode_pairs(policy, pairs, max_sequence_length);
  return mean_stats(policy, encoded, reference_scores(reference, encoded), beta);
}

TrainingRun train_dpo(ModelBackend& policy, const ModelBackend& reference,
                      const std::vector<PreferencePair>& pairs,
                      const std::vector<PreferencePair>& validation, const DpoConfig& config,
                      const TrainHooks& hooks) {
  config.validate();
  if (!reference.frozen()) throw BackendFailure("train_dpo", "reference backend must be frozen");
  TrainingRun run;
  if (config.epochs == 0 || pairs.empty()) return run;
  if (policy.frozen()) throw BackendFailure("train_dpo", "policy backend is frozen");

  const auto train_data = encode_pairs(policy, pairs, config.max_sequence_length);
  const auto valid_data = validation.empty() ? train_data
                                             : encode_pairs(policy, validation, config.max_sequence_length);
  const auto train_ref = reference_scores(reference, train_data);
  const auto valid_ref = reference_scores(reference, valid_data);

  auto check_reference = [&] {
    const auto now = summed_scores(reference, train_data.front());
    if (now.chosen != train_ref.front().chosen || now.rejected != train_ref.front().rejected) {
      throw ReferenceMutated(train_data.front().id);
    }
  };

  AdamW optimizer(adam_settings(config.learning_rate, config.weight_decay, config.adam));
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const Schedule schedule{static_cast<std::size_t>(config.batch_size),
                          static_cast<std::size_t>(config.gradient_accumulation_steps)};
  policy.zero_gradient();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto micro_batch = [&](std::span<const std::size_t> batch, double weight, std::size_t micro) {
      double batch_loss = 0.0;
      for (std::size_t i : batch) {
        const auto& pair = train_data[i];
        const auto chosen_lp = policy.score(pair.chosen.prompt, pair.chosen.completion);
        const auto rejected_lp = policy.score(pair.rejected.prompt, pair.rejected.completion);
        const auto stats =
            dpo_loss(sum(chosen_lp), sum(rejected_lp), train_ref[i].chosen, train_ref[i].rejected, config.beta);
        if (!std::isfinite(stats.loss)) {
          throw NonFiniteLoss("dpo epoch " + std::to_string(epoch) + " batch " + std::to_string(micro));
        }
        const double g = weight * dpo_loss_margin_gradient(stats.margin, config.beta);
        // Summed log-probabilities: every token of a response gets the same upstream value.
        policy.accumulate_gradient(pair.chosen.prompt, pair.chosen.completion,
                                   std::vector<double>(chosen_lp.size(), g));
        policy.accumulate_gradient(pair.rejected.prompt, pair.rejected.completion,
                                   std::vector<double>(rejected_lp.size(), -g));
        batch_loss += stats.loss;
      }
      return batch_loss;
    };
    run.epoch_losses.push_back(
        run_epoch(policy, optimizer, order, rng, schedule, run.updates, micro_batch));

    if (epoch % config.checkpoint_every == 0) {
      check_reference();
      const LossStats v = mean_stats(policy, valid_data, valid_ref, config.beta);
      std::map<std::string, double> scores{{"train_loss", run.epoch_losses.back()},
                                           {"loss", v.loss},
                                           {"margin", v.margin},
                                           {"reward_accuracy", v.reward_accuracy}};
      run.checkpoints.push_back(emit_checkpoint(policy, Stage::Dpo, epoch, std::move(scores), hooks));
    }
  }
  check_reference();
  return run;
}

const CheckpointRecord& select_checkpoint(const std::vector<CheckpointRecord>& checkpoints,
                                          const std::string& criterion) {
  if (checkpoints.empty()) throw NoCheckpoints();
  const bool minimize = criterion.ends_with("loss");
  const CheckpointRecord* best = &checkpoints.front();
  double best_score = best->validation_score(criterion);
  for (const auto& c : checkpoints) {
    const double s = c.validation_score(criterion);
    const bool better = minimize ? s < best_score : s > best_score;
    if (better || (s == best_score && c.epoch < best->epoch)) {
      best = &c;
      best_score = s;
    }
  }
  return *best;
}

void write_checkpoint_manifest(const std::filesystem::path& path,
                               const std::vector<CheckpointRecord>& checkpoints,
                               const std::string& criterion) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write checkpoint manifest");
  for (const auto& c : checkpoints) {
    nlohmann::ordered_json row;
    row["stage"] = to_string(c.stage);
    row["epoch"] = c.epoch;
    row["criterion"] = criterion;
    auto it = c.scores.find(criterion);
    row["score"] = it == c.scores.end() ? nlohmann::ordered_json() : nlohmann::ordered_json(it->second);
    row["snapshot"] = c.snapshot_path;
    row["scores"] = c.scores;
    out << row.dump() << '\n';
  }
}

std::string generate_cn(const ModelBackend& backend, const ExampleRecord& example, PromptStyle style,
                        const GenerationOptions& options) {
  const RenderedExample rendered = render(example, style);
  std::vector<TokenId> context = backend.encode(rendered.prompt_text);
  const auto stop = backend.marker_id(terminator(style));
  const std::size_t cap = static_cast<std::size_t>(std::max(options.max_sequence_length, 0));
  const std::size_t budget = options.max_new_tokens < 0 ? cap : static_cast<std::size_t>(options.max_new_tokens);

  std::mt19937_64 rng(options.seed);
  std::vector<TokenId> generated;
  while (context.size() < cap && generated.size() < budget) {
    const auto logprobs = backend.next_token_logprobs(context);
    TokenId next = 0;
    if (options.greedy) {
      for (std::size_t j = 1; j < logprobs.size(); ++j) {
        if (logprobs[j] > logprobs[static_cast<std::size_t>(next)]) next = static_cast<TokenId>(j);
      }
    } else {
      std::vector<double> weights(logprobs.size());
      for (std::size_t j = 0; j < weights.size(); ++j) weights[j] = std::exp(logprobs[j] / options.temperature);
      std::discrete_distribution<int> pick(weights.begin(), weights.end());
      next = static_cast<TokenId>(pick(rng));
    }
    if (stop && next == *stop) break;
    generated.push_back(next);
    context.push_back(next);
  }
  return extract_completion(rendered.prompt_text + backend.decode(generated), style);
}

}  // namespace cnalign
