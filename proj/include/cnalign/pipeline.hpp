#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cnalign/corpus.hpp"
#include "cnalign/generator.hpp"
#include "cnalign/http_endpoint.hpp"
#include "cnalign/prompting.hpp"
#include "cnalign/training.hpp"

namespace cnalign {

struct GeneratorSettings {
  std::string kind = "stub";  // stub | http
  std::filesystem::path stub_responses;
  EndpointSettings endpoint;
  std::optional<std::filesystem::path> request_template;
  int max_attempts = 3;
  int parallelism = 4;
  DecodeOptions decode;
};

struct JudgeSettings {
  std::string kind = "overlap";  // overlap | lexicographic | http
  EndpointSettings endpoint;
  int parallelism = 4;
  double k_factor = 32.0;
  double initial_rating = 1000.0;
};

struct EmbeddingSettings {
  std::string kind = "hashed";  // hashed | http
  std::size_t dimension = 64;
  EndpointSettings endpoint;
};

struct EvaluationSettings {
  Split eval_split = Split::Test;
  Split novelty_split = Split::Train;
  /// Run label -> language -> outputs file. Runs not listed here are read
  /// from <output_dir>/outputs/<run>/<lang>.jsonl.
  std::map<std::string, std::map<Language, std::filesystem::path>> runs;
  int max_new_tokens = 64;
};

/// One declarative description of a pipeline run. Relative paths resolve
/// against the config file's directory. Credentials come only from the
/// GENERATOR_API_KEY, JUDGE_API_KEY and EMBEDDING_API_KEY environment
/// variables.
struct PipelineConfig {
  std::filesystem::path base_dir = ".";
  std::map<Language, std::filesystem::path> corpora;
  Language train_language = Language::En;
  PromptStyle style = PromptStyle::Base;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 42;
  std::size_t toy_vocab_size = 32;
  std::string selection_criterion = "rouge_l";
  std::optional<std::filesystem::path> sft_checkpoint;
  GeneratorSettings generator;
  JudgeSettings judge;
  EmbeddingSettings embedding;
  SftConfig sft;
  DpoConfig dpo;
  EvaluationSettings evaluation;
};

/// Throws ConfigError for unknown keys, secrets in the file, or bad values.
PipelineConfig parse_pipeline_config(const std::string& json_text, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Entry point of the `cnalign` tool. Returns the process exit code; every
/// error is reported on err as "error [stage] entity: message".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cnalign
