#include "cnalign/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cnalign/embedding.hpp"
#include "cnalign/errors.hpp"
#include "cnalign/judge.hpp"
#include "cnalign/metrics.hpp"
#include "cnalign/preference.hpp"
#include "cnalign/report.hpp"
#include "cnalign/text.hpp"
#include "cnalign/toy_backend.hpp"

namespace cnalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads fields from a JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string scope) : object_(object), scope_(std::move(scope)) {
    if (!object_.is_object()) throw ConfigError(scope_, "expected an object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.contains(key)) throw ConfigError(name(key), "unknown key");
    }
  }

  template <typename T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end()) return;
    try {
      target = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name(key), e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  std::string name(const std::string& key) const { return scope_.empty() ? key : scope_ + "." + key; }

 private:
  const json& object_;
  std::string scope_;
  std::set<std::string> seen_;
};

void reject_secrets(const json& node, const std::string& scope) {
  static const std::set<std::string> kSecretKeys = {"api_key", "apikey", "key", "token", "secret",
                                                    "password", "authorization"};
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      if (kSecretKeys.contains(key)) {
        throw ConfigError(scope + key, "credentials belong in environment variables, not config files");
      }
      reject_secrets(value, scope + key + ".");
    }
  } else if (node.is_array()) {
    for (const auto& item : node) reject_secrets(item, scope);
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

void read_endpoint(ObjectReader& r, EndpointSettings& e) {
  r.get("url", e.url);
  r.get("model", e.model);
  r.get("temperature", e.temperature);
  r.get("max_tokens", e.max_tokens);
  int timeout_ms = static_cast<int>(e.timeout.count());
  r.get("timeout_ms", timeout_ms);
  e.timeout = std::chrono::milliseconds(timeout_ms);
  r.get("retries", e.transport_retries);
  int backoff_ms = static_cast<int>(e.retry_backoff.count());
  r.get("retry_backoff_ms", backoff_ms);
  e.retry_backoff = std::chrono::milliseconds(backoff_ms);
  r.get("requests_per_second", e.requests_per_second);
}

void read_adam(ObjectReader& r, AdamMoments& adam) {
  r.get("adam_beta1", adam.beta1);
  r.get("adam_beta2", adam.beta2);
  r.get("adam_epsilon", adam.epsilon);
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  reject_secrets(doc, "");

  PipelineConfig c;
  c.base_dir = base_dir;
  ObjectReader root(doc, "");
  root.get("seed", c.seed);
  if (const json* corpora = root.child("corpora")) {
    if (!corpora->is_object()) throw ConfigError("corpora", "expected language -> path");
    for (const auto& [code, path] : corpora->items()) {
      c.corpora[parse_language(code)] = resolve(base_dir, path.get<std::string>());
    }
  }
  std::string text;
  text = to_string(c.train_language);
  root.get("train_language", text);
  c.train_language = parse_language(text);
  text = to_string(c.style);
  root.get("style", text);
  c.style = parse_prompt_style(text);
  std::string output_dir = c.output_dir.string();
  root.get("output_dir", output_dir);
  c.output_dir = resolve(base_dir, output_dir);
  root.get("toy_vocab_size", c.toy_vocab_size);
  root.get("selection_criterion", c.selection_criterion);
  std::string sft_checkpoint;
  root.get("sft_checkpoint", sft_checkpoint);
  if (!sft_checkpoint.empty()) c.sft_checkpoint = resolve(base_dir, sft_checkpoint);

  if (const json* node = root.child("generator")) {
    ObjectReader r(*node, "generator");
    r.get("kind", c.generator.kind);
    std::string responses;
    r.get("responses", responses);
    if (!responses.empty()) c.generator.stub_responses = resolve(base_dir, responses);
    std::string tmpl;
    r.get("template", tmpl);
    if (!tmpl.empty()) c.generator.request_template = resolve(base_dir, tmpl);
    r.get("max_attempts", c.generator.max_attempts);
    r.get("parallelism", c.generator.parallelism);
    read_endpoint(r, c.generator.endpoint);
  }
  c.generator.endpoint.api_key_env = "GENERATOR_API_KEY";
  c.generator.decode = DecodeOptions{c.generator.endpoint.temperature, c.generator.endpoint.max_tokens};

  if (const json* node = root.child("judge")) {
    ObjectReader r(*node, "judge");
    r.get("kind", c.judge.kind);
    r.get("parallelism", c.judge.parallelism);
    r.get("k_factor", c.judge.k_factor);
    r.get("initial_rating", c.judge.initial_rating);
    read_endpoint(r, c.judge.endpoint);
  }
  c.judge.endpoint.api_key_env = "JUDGE_API_KEY";

  if (const json* node = root.child("embedding")) {
    ObjectReader r(*node, "embedding");
    r.get("kind", c.embedding.kind);
    r.get("dimension", c.embedding.dimension);
    read_endpoint(r, c.embedding.endpoint);
  }
  c.embedding.endpoint.api_key_env = "EMBEDDING_API_KEY";

  if (const json* node = root.child("sft")) {
    ObjectReader r(*node, "sft");
    auto& s = c.sft;
    r.get("learning_rate", s.learning_rate);
    r.get("epochs", s.epochs);
    r.get("batch_size", s.batch_size);
    r.get("gradient_accumulation_steps", s.gradient_accumulation_steps);
    r.get("weight_decay", s.weight_decay);
    r.get("adapter_rank", s.adapter_rank);
    r.get("adapter_scale", s.adapter_scale);
    r.get("adapter_dropout", s.adapter_dropout);
    r.get("max_sequence_length", s.max_sequence_length);
    r.get("checkpoint_every", s.checkpoint_every);
    read_adam(r, s.adam);
  }
  if (const json* node = root.child("dpo")) {
    ObjectReader r(*node, "dpo");
    auto& d = c.dpo;
    r.get("learning_rate", d.learning_rate);
    r.get("epochs", d.epochs);
    r.get("beta", d.beta);
    r.get("batch_size", d.batch_size);
    r.get("gradient_accumulation_steps", d.gradient_accumulation_steps);
    r.get("weight_decay", d.weight_decay);
    r.get("max_sequence_length", d.max_sequence_length);
    r.get("checkpoint_every", d.checkpoint_every);
    read_adam(r, d.adam);
  }
  c.sft.seed = c.seed;
  c.dpo.seed = c.seed;

  if (const json* node = root.child("evaluation")) {
    ObjectReader r(*node, "evaluation");
    text = to_string(c.evaluation.eval_split);
    r.get("eval_split", text);
    c.evaluation.eval_split = parse_split(text);
    text = to_string(c.evaluation.novelty_split);
    r.get("novelty_split", text);
    c.evaluation.novelty_split = parse_split(text);
    r.get("max_new_tokens", c.evaluation.max_new_tokens);
    if (const json* runs = r.child("runs")) {
      for (const auto& [label, by_language] : runs->items()) {
        for (const auto& [code, path] : by_language.items()) {
          c.evaluation.runs[label][parse_language(code)] = resolve(base_dir, path.get<std::string>());
        }
      }
    }
  }
  c.sft.validate();
  c.dpo.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open config");
  std::stringstream text;
  text << in.rdbuf();
  return parse_pipeline_config(text.str(), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

namespace {

Clock pipeline_clock() {
  // SOURCE_DATE_EPOCH pins timestamps for reproducible outputs.
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    const auto fixed = std::chrono::system_clock::time_point(std::chrono::seconds(std::stoll(epoch)));
    return [fixed] { return fixed; };
  }
  return [] { return std::chrono::system_clock::now(); };
}

Corpus load_language(const PipelineConfig& c, Language language) {
  auto it = c.corpora.find(language);
  if (it == c.corpora.end()) {
    throw MissingPrerequisite("config", to_string(language), "no corpus path configured for this language");
  }
  if (!fs::exists(it->second)) throw IoError(it->second.string(), "corpus file not found");
  return load_corpus(it->second, language);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot write");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot read");
  std::stringstream text;
  text << in.rdbuf();
  return text.str();
}

std::unique_ptr<GeneratorClient> make_generator(const PipelineConfig& c) {
  if (c.generator.kind == "stub") {
    if (c.generator.stub_responses.empty()) throw ConfigError("generator.responses", "required for the stub");
    if (!fs::exists(c.generator.stub_responses)) {
      throw IoError(c.generator.stub_responses.string(), "stub responses not found");
    }
    return StubGeneratorClient::from_file(c.generator.stub_responses);
  }
  if (c.generator.kind == "http") return std::make_unique<HttpGeneratorClient>(c.generator.endpoint);
  throw ConfigError("generator.kind", "expected stub or http");
}

/// Prefers the candidate whose LCS overlap with the knowledge is larger.
class OverlapJudge final : public JudgeClient {
 public:
  Verdict compare(std::string_view, std::string_view knowledge, std::string_view a,
                  std::string_view b) override {
    const double sa = rouge_l(a, knowledge, tok_);
    const double sb = rouge_l(b, knowledge, tok_);
    if (sa == sb) return Verdict::Tie;
    return sa > sb ? Verdict::A : Verdict::B;
  }

 private:
  WhitespaceTokenizer tok_;
};

std::unique_ptr<JudgeClient> make_judge(const PipelineConfig& c) {
  if (c.judge.kind == "overlap") return std::make_unique<OverlapJudge>();
  if (c.judge.kind == "lexicographic") return std::make_unique<LexicographicJudge>();
  if (c.judge.kind == "http") return std::make_unique<HttpJudgeClient>(c.judge.endpoint);
  throw ConfigError("judge.kind", "expected overlap, lexicographic or http");
}

std::unique_ptr<EmbeddingBackend> make_embedding(const PipelineConfig& c) {
  if (c.embedding.kind == "hashed") return std::make_unique<HashedEmbedding>(c.embedding.dimension);
  if (c.embedding.kind == "http") return std::make_unique<HttpEmbeddingBackend>(c.embedding.endpoint);
  throw ConfigError("embedding.kind", "expected hashed or http");
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

// ---------------------------------------------------------------- ingest

int cmd_ingest(const PipelineConfig* config, const std::string& path, const std::string& language,
               std::ostream& out) {
  std::vector<std::pair<Language, fs::path>> inputs;
  if (!path.empty()) {
    if (language.empty()) throw ConfigError("--language", "required with --path");
    inputs.emplace_back(parse_language(language), path);
  } else {
    if (!config) throw ConfigError("ingest", "pass --path/--language or --config");
    for (const auto& [lang, p] : config->corpora) {
      if (language.empty() || to_string(lang) == language) inputs.emplace_back(lang, p);
    }
  }
  for (const auto& [lang, p] : inputs) {
    if (!fs::exists(p)) throw IoError(p.string(), "corpus file not found");
    const SplitStats stats = validate_splits(load_corpus(p, lang));
    out << fmt::format("{} {} {} {} ({:.1f}% / {:.1f}% / {:.1f}%)\n", to_string(lang),
                       stats.count(Split::Train), stats.count(Split::Validation), stats.count(Split::Test),
                       100 * stats.fraction(Split::Train), 100 * stats.fraction(Split::Validation),
                       100 * stats.fraction(Split::Test));
  }
  return 0;
}

// ---------------------------------------------------------------- render

int cmd_render(const PipelineConfig* config, const std::string& path, const std::string& language,
               const std::string& style, const std::string& id, std::ostream& out) {
  const PromptStyle prompt_style = parse_prompt_style(style);
  std::vector<Corpus> corpora;
  if (!path.empty()) {
    corpora.push_back(load_corpus(path, parse_language(language.empty() ? "en" : language)));
  } else if (config) {
    for (const auto& [lang, p] : config->corpora) {
      if (language.empty() || to_string(lang) == language) corpora.push_back(load_corpus(p, lang));
    }
  } else {
    throw ConfigError("render", "pass --path/--language or --config");
  }
  for (const auto& corpus : corpora) {
    if (const ExampleRecord* r = corpus.find(id)) {
      out << render(*r, prompt_style).full_text << '\n';
      return 0;
    }
  }
  throw Error("render", id, "example '" + id + "' not found");
}

// ---------------------------------------------------------------- build-prefs

int cmd_build_prefs(const PipelineConfig& c, std::ostream& out) {
  const Corpus corpus = load_language(c, c.train_language);
  const auto train = filter_split(corpus, Split::Train);
  auto client = make_generator(c);
  ResponseCache cache(c.output_dir / "cache" / "rejections.jsonl");
  BuildOptions options;
  options.max_attempts = c.generator.max_attempts;
  options.parallelism = c.generator.parallelism;
  options.decode = c.generator.decode;
  options.clock = pipeline_clock();
  if (c.generator.request_template) options.request_template = RejectionTemplate::load(*c.generator.request_template);

  const PreferenceDataset dataset = build_preference_dataset(train, c.style, *client, cache, options);
  const fs::path manifest = write_preference_dataset(c.output_dir / "prefs", dataset);
  out << dataset.pairs.size() << " pairs\n";
  out << dataset.generated << " generated, " << dataset.cached << " cached\n";
  out << "verdicts:";
  for (auto reason : {RejectionReason::Ok, RejectionReason::Empty, RejectionReason::EqualsChosen,
                      RejectionReason::RepeatsHs, RejectionReason::TooLong}) {
    auto it = dataset.verdicts.find(reason);
    out << ' ' << to_string(reason) << '=' << (it == dataset.verdicts.end() ? 0 : it->second);
  }
  out << "\nmanifest: " << manifest.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

std::map<std::string, double> validation_rouge(const ModelBackend& backend,
                                               const std::vector<ExampleRecord>& records, PromptStyle style,
                                               const PipelineConfig& c, int max_sequence_length) {
  if (records.empty()) return {};
  const WhitespaceTokenizer tok;
  GenerationOptions options;
  options.max_new_tokens = c.evaluation.max_new_tokens;
  options.max_sequence_length = max_sequence_length;
  double total = 0.0;
  for (const auto& r : records) total += rouge_l(generate_cn(backend, r, style, options), r.counter_narrative, tok);
  return {{"rouge_l", total / static_cast<double>(records.size())}};
}

void write_stage_outputs(const fs::path& dir, const TrainingRun& run, const std::string& criterion,
                         std::ostream& out) {
  write_checkpoint_manifest(dir / "checkpoints.jsonl", run.checkpoints, criterion);
  std::string train_curve = "epoch\ttrain_loss\n";
  for (std::size_t e = 0; e < run.epoch_losses.size(); ++e) {
    train_curve += fmt::format("{}\t{}\n", e + 1, format_double(run.epoch_losses[e]));
  }
  write_text(dir / "train_curve.tsv", train_curve);

  std::set<std::string> names;
  for (const auto& ckpt : run.checkpoints) {
    for (const auto& [name, value] : ckpt.scores) names.insert(name);
  }
  std::string valid_curve = "epoch";
  for (const auto& n : names) valid_curve += "\t" + n;
  valid_curve += "\n";
  for (const auto& ckpt : run.checkpoints) {
    valid_curve += std::to_string(ckpt.epoch);
    for (const auto& n : names) {
      auto it = ckpt.scores.find(n);
      valid_curve += "\t" + (it == ckpt.scores.end() ? std::string("") : format_double(it->second));
    }
    valid_curve += "\n";
  }
  write_text(dir / "validation_curve.tsv", valid_curve);

  const CheckpointRecord& best = select_checkpoint(run.checkpoints, criterion);
  const fs::path selected = dir / "selected.ckpt.json";
  write_text(selected, read_text(dir / best.snapshot_path));
  nlohmann::ordered_json meta;
  meta["stage"] = to_string(best.stage);
  meta["epoch"] = best.epoch;
  meta["criterion"] = criterion;
  meta["score"] = best.validation_score(criterion);
  meta["snapshot"] = best.snapshot_path;
  write_text(dir / "selected.json", meta.dump(2) + "\n");
  out << run.checkpoints.size() << " checkpoints, selected epoch " << best.epoch << " by " << criterion
      << "\nmanifest: " << (dir / "checkpoints.jsonl").string() << "\nselected checkpoint: " << selected.string()
      << '\n';
}

TrainHooks stage_hooks(const fs::path& dir, const std::vector<ExampleRecord>& valid, const PipelineConfig& c,
                       int max_sequence_length) {
  TrainHooks hooks;
  hooks.validator = [&valid, &c, max_sequence_length](const ModelBackend& backend) {
    return validation_rouge(backend, valid, c.style, c, max_sequence_length);
  };
  hooks.sink = [dir](const ModelBackend& backend, const CheckpointRecord& record) {
    const std::string name = fmt::format("checkpoint-epoch-{:04d}.json", record.epoch);
    dynamic_cast<const ToyBigramBackend&>(backend).save(dir / name);
    return name;
  };
  return hooks;
}

int cmd_train(const PipelineConfig& c, const std::string& stage_name, const std::string& sft_override,
              std::ostream& out) {
  const Stage stage = parse_stage(stage_name);
  const Corpus corpus = load_language(c, c.train_language);
  const auto valid = filter_split(corpus, Split::Validation);

  if (stage == Stage::Sft) {
    const auto train = filter_split(corpus, Split::Train);
    std::vector<RenderedExample> train_rendered, valid_rendered;
    std::vector<std::string> texts;
    for (const auto& r : train) {
      train_rendered.push_back(render(r, c.style));
      texts.push_back(train_rendered.back().full_text);
    }
    for (const auto& r : valid) valid_rendered.push_back(render(r, c.style));

    ToyBackendOptions options;
    options.adapter_rank = c.sft.adapter_rank;
    options.adapter_scale = c.sft.adapter_scale;
    options.adapter_dropout = c.sft.adapter_dropout;
    options.seed = c.seed;
    ToyBigramBackend backend(ToyBigramBackend::build_vocabulary(texts, c.toy_vocab_size), options);

    SftConfig config = c.sft;
    config.checkpoint_every = std::min(config.checkpoint_every, std::max(config.epochs, 1));
    const fs::path dir = c.output_dir / "sft";
    fs::create_directories(dir);
    const TrainingRun run =
        train_sft(backend, train_rendered, valid_rendered, config, stage_hooks(dir, valid, c, config.max_sequence_length));
    if (run.checkpoints.empty()) throw NoCheckpoints();
    write_stage_outputs(dir, run, c.selection_criterion, out);
    return 0;
  }

  std::optional<fs::path> init = sft_override.empty() ? c.sft_checkpoint : std::optional<fs::path>(sft_override);
  if (!init) throw MissingPrerequisite("train", "dpo", "SFT checkpoint (set sft_checkpoint or pass --sft-checkpoint)");
  if (!fs::exists(*init)) throw MissingPrerequisite("train", init->string(), "SFT checkpoint file does not exist");
  const fs::path pairs_path = c.output_dir / "prefs" / "pairs.jsonl";
  if (!fs::exists(pairs_path)) throw MissingPrerequisite("train", pairs_path.string(), "preference pairs (run build-prefs first)");

  ToyBigramBackend policy = ToyBigramBackend::load(*init);
  auto reference = policy.clone();
  reference->freeze();
  const auto pairs = load_pairs(pairs_path);

  DpoConfig config = c.dpo;
  config.checkpoint_every = std::min(config.checkpoint_every, std::max(config.epochs, 1));
  const fs::path dir = c.output_dir / "dpo";
  fs::create_directories(dir);
  const TrainingRun run =
      train_dpo(policy, *reference, pairs, {}, config, stage_hooks(dir, valid, c, config.max_sequence_length));
  if (run.checkpoints.empty()) throw NoCheckpoints();
  write_stage_outputs(dir, run, c.selection_criterion, out);
  return 0;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const PipelineConfig& c, const std::string& checkpoint, const std::string& run_label,
                 const std::string& language, const std::string& split, std::ostream& out) {
  if (!fs::exists(checkpoint)) throw MissingPrerequisite("generate", checkpoint, "checkpoint file does not exist");
  const ToyBigramBackend backend = ToyBigramBackend::load(checkpoint);
  const Language lang = language.empty() ? c.train_language : parse_language(language);
  const Split which = split.empty() ? c.evaluation.eval_split : parse_split(split);
  const Corpus corpus = load_language(c, lang);

  GenerationOptions options;
  options.max_new_tokens = c.evaluation.max_new_tokens;
  options.max_sequence_length = c.sft.max_sequence_length;
  options.seed = c.seed;
  std::string text;
  std::size_t count = 0;
  for (const auto& r : filter_split(corpus, which)) {
    nlohmann::ordered_json row;
    row["id"] = r.id;
    row["output"] = generate_cn(backend, r, c.style, options);
    text += row.dump() + "\n";
    ++count;
  }
  const fs::path path = c.output_dir / "outputs" / run_label / (to_string(lang) + ".jsonl");
  write_text(path, text);
  out << count << " outputs\noutputs: " << path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- evaluate

std::map<std::string, std::string> load_outputs(const fs::path& path) {
  std::map<std::string, std::string> outputs;
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open outputs");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const auto row = json::parse(line);
      outputs[row.at("id").get<std::string>()] = row.at("output").get<std::string>();
    } catch (const json::exception& e) {
      throw MalformedRecord(number, "output", e.what());
    }
  }
  return outputs;
}

std::vector<std::string> align_outputs(const std::map<std::string, std::string>& outputs,
                                       const std::vector<ExampleRecord>& records, const std::string& run) {
  std::vector<std::string> aligned;
  std::set<std::string> ids;
  for (const auto& r : records) {
    auto it = outputs.find(r.id);
    if (it == outputs.end()) throw MisalignedOutputs(r.id, "run '" + run + "' has no output for it");
    aligned.push_back(it->second);
    ids.insert(r.id);
  }
  for (const auto& [id, text] : outputs) {
    if (!ids.contains(id)) throw MisalignedOutputs(id, "run '" + run + "' has an output for an unknown example");
  }
  return aligned;
}

int cmd_evaluate(const PipelineConfig& c, const std::vector<std::string>& runs, std::ostream& out) {
  if (runs.empty()) throw ConfigError("--runs", "at least one run label is required");
  const WhitespaceTokenizer tok;
  auto embedding = make_embedding(c);
  auto judge = make_judge(c);
  EloSettings elo{c.judge.initial_rating, c.judge.k_factor, c.judge.parallelism};

  auto outputs_path = [&](const std::string& run, Language lang) {
    auto it = c.evaluation.runs.find(run);
    if (it != c.evaluation.runs.end()) {
      auto jt = it->second.find(lang);
      if (jt != it->second.end()) return jt->second;
    }
    return c.output_dir / "outputs" / run / (to_string(lang) + ".jsonl");
  };

  std::vector<MetricReport> reports;
  for (const auto& [lang, corpus_path] : c.corpora) {
    std::size_t present = 0;
    for (const auto& run : runs) present += fs::exists(outputs_path(run, lang)) ? 1 : 0;
    if (present == 0) continue;
    if (present != runs.size()) {
      for (const auto& run : runs) {
        if (!fs::exists(outputs_path(run, lang))) {
          throw MissingPrerequisite("evaluate", outputs_path(run, lang).string(), "outputs for run " + run);
        }
      }
    }
    const Corpus corpus = load_language(c, lang);
    const auto records = filter_split(corpus, c.evaluation.eval_split);
    std::vector<std::string> training_cns;
    for (const auto& r : filter_split(corpus, c.evaluation.novelty_split)) training_cns.push_back(r.counter_narrative);

    std::map<std::string, std::vector<std::string>> by_system;
    for (const auto& run : runs) by_system[run] = align_outputs(load_outputs(outputs_path(run, lang)), records, run);
    const EloTable table = judge_tournament(by_system, records, *judge, elo);
    for (const auto& run : runs) {
      MetricReport report = evaluate_run(by_system[run], records, training_cns, tok, *embedding, run);
      report.judge_rating = round1(table.ratings.at(run));
      reports.push_back(std::move(report));
    }
  }
  if (reports.empty()) throw MissingPrerequisite("evaluate", "outputs", "no run has outputs for any configured language");

  const EmittedReport emitted = emit_report(reports);
  const fs::path dir = c.output_dir / "report";
  write_text(dir / "report.md", emitted.table);
  write_text(dir / "report.jsonl", emitted.sidecar);
  out << emitted.table << "report: " << (dir / "report.md").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- report

int cmd_report(const std::string& sidecar, const std::string& output, std::ostream& out) {
  const auto reports = parse_report_sidecar(read_text(sidecar));
  if (reports.empty()) throw EmptyCorpus(sidecar);
  const EmittedReport emitted = emit_report(reports);
  if (!output.empty()) write_text(output, emitted.table);
  out << emitted.table;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counter-narrative alignment pipeline: corpus ingestion, preference pairs, SFT/DPO, evaluation"};
  app.require_subcommand(1);
  std::string config_path;

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and print split counts");
  std::string path, language;
  ingest->add_option("--config", config_path, "Pipeline config file");
  ingest->add_option("--path", path, "Corpus file (one JSON record per line)");
  ingest->add_option("--language", language, "Language code: en, eu, it, es");

  auto* render_cmd = app.add_subcommand("render", "Print the rendered training text of one example");
  std::string style = "base", id;
  render_cmd->add_option("--config", config_path, "Pipeline config file");
  render_cmd->add_option("--path", path, "Corpus file");
  render_cmd->add_option("--language", language, "Language code");
  render_cmd->add_option("--style", style, "base or instruct");
  render_cmd->add_option("--id", id, "Example id")->required();

  auto* prefs = app.add_subcommand("build-prefs", "Generate rejected responses and write preference pairs");
  prefs->add_option("--config", config_path, "Pipeline config file")->required();

  auto* train = app.add_subcommand("train", "Run the SFT or DPO stage on the toy backend");
  std::string stage, sft_checkpoint;
  train->add_option("--config", config_path, "Pipeline config file")->required();
  train->add_option("--stage", stage, "sft or dpo")->required();
  train->add_option("--sft-checkpoint", sft_checkpoint, "SFT checkpoint to start DPO from");

  auto* generate = app.add_subcommand("generate", "Decode counter narratives for a split");
  std::string checkpoint, run_label, split;
  generate->add_option("--config", config_path, "Pipeline config file")->required();
  generate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  generate->add_option("--run", run_label, "Run label")->required();
  generate->add_option("--language", language, "Language code (default: train language)");
  generate->add_option("--split", split, "Split to decode (default: evaluation split)");

  auto* evaluate = app.add_subcommand("evaluate", "Score runs and emit the comparative report");
  std::vector<std::string> runs;
  evaluate->add_option("--config", config_path, "Pipeline config file")->required();
  evaluate->add_option("--runs", runs, "Run labels")->required()->delimiter(',');

  auto* report = app.add_subcommand("report", "Render a report table from a sidecar file");
  std::string sidecar, output;
  report->add_option("--sidecar", sidecar, "Report sidecar (one JSON row per report)")->required();
  report->add_option("--output", output, "Also write the table here");

  std::vector<const char*> argv{"cnalign"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    std::optional<PipelineConfig> config;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw IoError(config_path, "config file not found");
      config = load_pipeline_config(config_path);
    }
    const PipelineConfig* cfg = config ? &*config : nullptr;
    if (ingest->parsed()) return cmd_ingest(cfg, path, language, out);
    if (render_cmd->parsed()) return cmd_render(cfg, path, language, style, id, out);
    if (prefs->parsed()) return cmd_build_prefs(*config, out);
    if (train->parsed()) return cmd_train(*config, stage, sft_checkpoint, out);
    if (generate->parsed()) return cmd_generate(*config, checkpoint, run_label, language, split, out);
    if (evaluate->parsed()) return cmd_evaluate(*config, runs, out);
    if (report->parsed()) return cmd_report(sidecar, output, out);
  } catch (const Error& e) {
    err << "error [" << e.stage() << "] " << e.entity() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error [internal] -: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace cnalign
