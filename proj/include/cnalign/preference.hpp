#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cnalign/corpus.hpp"
#include "cnalign/errors.hpp"
#include "cnalign/generator.hpp"
#include "cnalign/prompting.hpp"

namespace cnalign {

/// Minimum run of consecutive HS tokens that counts as repeating the HS.
inline constexpr std::size_t kRepeatWindow = 8;
/// Longest accepted rejected response, in whitespace tokens.
inline constexpr std::size_t kMaxRejectedTokens = 128;

RejectionReason parse_rejection_reason(std::string_view name);

struct RejectionVerdict {
  bool accepted = false;
  RejectionReason reason = RejectionReason::Empty;

  bool operator==(const RejectionVerdict&) const = default;
};

/// Checks in order: empty, equal to the gold CN, a copied HS run of
/// kRepeatWindow tokens (the whole HS when it is shorter), too long.
RejectionVerdict validate_rejected(const ExampleRecord& example, std::string_view candidate);

struct PreferencePair {
  std::string source_id;
  PromptStyle style = PromptStyle::Base;
  std::string prompt_text;
  std::string chosen;
  std::string rejected;
  std::string generator_identity;
  std::string template_version;
  std::string created_at;

  bool operator==(const PreferencePair&) const = default;
};

std::string pair_to_json_line(const PreferencePair& pair);
PreferencePair pair_from_json_line(std::string_view line);
std::vector<PreferencePair> load_pairs(const std::filesystem::path& path);

using Clock = std::function<std::chrono::system_clock::time_point()>;

/// ISO-8601 UTC with second precision, e.g. 2024-01-31T12:00:00Z.
std::string format_timestamp(std::chrono::system_clock::time_point t);

struct CacheEntry {
  std::string example_id;
  std::string template_version;
  std::string generator;
  std::string request_hash;
  std::string response;
  RejectionReason verdict = RejectionReason::Ok;
  int attempts = 0;
  std::string created_at;
};

/// Accepted generator responses keyed by (example id, template version,
/// generator identity). When backed by a file, every store is appended and
/// flushed immediately so interrupted runs resume. Thread-safe.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path path);

  /// Hit only when the stored request hash matches as well.
  std::optional<CacheEntry> lookup(const std::string& example_id, const std::string& template_version,
                                   const std::string& generator, const std::string& request_hash) const;
  void store(const CacheEntry& entry);
  /// Rewrites the backing file in key order, dropping superseded lines.
  void compact();
  std::size_t size() const;

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, CacheEntry> entries_;
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
};

struct RequestOptions {
  int max_attempts = 3;
  RejectionTemplate request_template = RejectionTemplate::builtin();
  DecodeOptions decode;
  Clock clock = [] { return std::chrono::system_clock::now(); };
};

struct RejectedResponse {
  std::string text;
  int attempts = 0;  // generator calls made; 0 on a cache hit
  bool from_cache = false;
  std::vector<RejectionReason> verdicts;
  std::string created_at;
};

/// Throws GenerationExhausted (validation) or TransportError (client).
RejectedResponse request_rejected(const ExampleRecord& example, GeneratorClient& client,
                                  const RequestOptions& options, ResponseCache* cache = nullptr);

struct BuildOptions : RequestOptions {
  int parallelism = 4;
};

struct PreferenceDataset {
  std::vector<PreferencePair> pairs;
  std::size_t generated = 0;
  std::size_t cached = 0;
  std::map<RejectionReason, std::size_t> verdicts;  // one count per generator call
  std::string generator_identity;
  std::string template_version;
  PromptStyle style = PromptStyle::Base;
};

/// One pair per record, in input order. Records must be from the train
/// split. On GenerationExhausted, accepted responses are already in the
/// cache; the error for the lowest failing input index is rethrown.
PreferenceDataset build_preference_dataset(const std::vector<ExampleRecord>& train_records,
                                           PromptStyle style, GeneratorClient& client,
                                           ResponseCache& cache, const BuildOptions& options = {});

/// Writes pairs.jsonl and manifest.json into dir; returns the manifest path.
std::filesystem::path write_preference_dataset(const std::filesystem::path& dir,
                                               const PreferenceDataset& dataset);

}  // namespace cnalign
