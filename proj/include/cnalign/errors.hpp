#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cnalign {

/// Base class for every pipeline failure. Each error names the stage that
/// raised it and the entity (file, example id, batch) it concerns.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, std::string entity, const std::string& message)
      : std::runtime_error(message), stage_(std::move(stage)), entity_(std::move(entity)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& entity() const noexcept { return entity_; }

 private:
  std::string stage_;
  std::string entity_;
};

// corpus

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error("io", path, what + ": " + path) {}
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, std::string field, const std::string& detail)
      : Error("corpus", "line " + std::to_string(line),
              "malformed record at line " + std::to_string(line) + ", field '" + field + "': " + detail),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class UnknownLanguage : public Error {
 public:
  explicit UnknownLanguage(const std::string& value)
      : Error("corpus", value, "unknown language '" + value + "'") {}
};

class UnknownSplit : public Error {
 public:
  explicit UnknownSplit(const std::string& value)
      : Error("corpus", value, "unknown split '" + value + "'") {}
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id)
      : Error("corpus", id, "duplicate example id '" + id + "'") {}
};

class EmptyCorpus : public Error {
 public:
  explicit EmptyCorpus(const std::string& entity = "corpus")
      : Error("corpus", entity, "corpus is empty: " + entity) {}
};

// prompting

class MissingCue : public Error {
 public:
  explicit MissingCue(const std::string& cue)
      : Error("prompting", cue, "completion cue '" + cue + "' not found") {}
};

// preference

enum class RejectionReason { Ok, Empty, EqualsChosen, RepeatsHs, TooLong };

std::string to_string(RejectionReason reason);

class GenerationExhausted : public Error {
 public:
  GenerationExhausted(const std::string& example_id, RejectionReason last, int attempts)
      : Error("preference", example_id,
              "no acceptable rejected response for '" + example_id + "' after " +
                  std::to_string(attempts) + " attempts (last verdict " + to_string(last) + ")"),
        example_id_(example_id),
        last_reason_(last) {}

  const std::string& example_id() const noexcept { return example_id_; }
  RejectionReason last_reason() const noexcept { return last_reason_; }

 private:
  std::string example_id_;
  RejectionReason last_reason_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& endpoint, const std::string& detail)
      : Error("transport", endpoint, "request to " + endpoint + " failed: " + detail) {}
};

// alignment

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& detail)
      : Error("config", field, field + ": " + detail) {}
};

class EmptyMask : public Error {
 public:
  EmptyMask() : Error("alignment", "sft_loss", "loss mask selects no tokens") {}
};

class NonPositiveBeta : public Error {
 public:
  explicit NonPositiveBeta(double beta)
      : Error("alignment", "dpo_loss", "beta must be positive, got " + std::to_string(beta)) {}
};

class BackendFailure : public Error {
 public:
  BackendFailure(const std::string& entity, const std::string& detail)
      : Error("backend", entity, detail) {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(const std::string& batch_id)
      : Error("alignment", batch_id, "non-finite loss in batch " + batch_id) {}
};

class ReferenceMutated : public Error {
 public:
  explicit ReferenceMutated(const std::string& pair_id)
      : Error("alignment", pair_id, "reference scores drifted for pair " + pair_id) {}
};

class NoCheckpoints : public Error {
 public:
  NoCheckpoints() : Error("alignment", "checkpoints", "no checkpoints to select from") {}
};

class MissingPrerequisite : public Error {
 public:
  MissingPrerequisite(const std::string& stage, const std::string& entity, const std::string& what)
      : Error(stage, entity, "missing prerequisite: " + what) {}
};

// evaluation

class EmptyText : public Error {
 public:
  explicit EmptyText(const std::string& which)
      : Error("evaluation", which, which + " text has no tokens") {}
};

class MisalignedOutputs : public Error {
 public:
  explicit MisalignedOutputs(const std::string& id, const std::string& detail = "")
      : Error("evaluation", id, "outputs misaligned at example '" + id + "'" +
                                    (detail.empty() ? std::string() : ": " + detail)) {}
};

}  // namespace cnalign
