#include "cnalign/preference.hpp"

#include <atomic>
#include <ctime>
#include <exception>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "cnalign/text.hpp"

namespace cnalign {

std::string to_string(RejectionReason reason) {
  switch (reason) {
    case RejectionReason::Ok: return "OK";
    case RejectionReason::Empty: return "EMPTY";
    case RejectionReason::EqualsChosen: return "EQUALS_CHOSEN";
    case RejectionReason::RepeatsHs: return "REPEATS_HS";
    case RejectionReason::TooLong: return "TOO_LONG";
  }
  return "?";
}

RejectionReason parse_rejection_reason(std::string_view name) {
  for (auto r : {RejectionReason::Ok, RejectionReason::Empty, RejectionReason::EqualsChosen,
                 RejectionReason::RepeatsHs, RejectionReason::TooLong}) {
    if (name == to_string(r)) return r;
  }
  throw std::invalid_argument("unknown verdict '" + std::string(name) + "'");
}

namespace {

bool contains_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle,
                  std::size_t offset, std::size_t length) {
  if (length == 0 || haystack.size() < length) return false;
  for (std::size_t start = 0; start + length <= haystack.size(); ++start) {
    bool match = true;
    for (std::size_t k = 0; k < length && match; ++k) match = haystack[start + k] == needle[offset + k];
    if (match) return true;
  }
  return false;
}

}  // namespace

RejectionVerdict validate_rejected(const ExampleRecord& example, std::string_view candidate) {
  const std::string text = trim(nfc(candidate));
  if (text.empty()) return {false, RejectionReason::Empty};
  if (text == trim(nfc(example.counter_narrative))) return {false, RejectionReason::EqualsChosen};

  const WhitespaceTokenizer tok;
  const auto cand = tok.tokenize(text);
  const auto hs = tok.tokenize(example.hate_speech);
  const std::size_t window = std::min(kRepeatWindow, hs.size());
  for (std::size_t offset = 0; window > 0 && offset + window <= hs.size(); ++offset) {
    if (contains_run(cand, hs, offset, window)) return {false, RejectionReason::RepeatsHs};
  }
  if (cand.size() > kMaxRejectedTokens) return {false, RejectionReason::TooLong};
  return {true, RejectionReason::Ok};
}

std::string pair_to_json_line(const PreferencePair& p) {
  nlohmann::ordered_json row;
  row["source_id"] = p.source_id;
  row["style"] = to_string(p.style);
  row["prompt_text"] = p.prompt_text;
  row["chosen"] = p.chosen;
  row["rejected"] = p.rejected;
  row["generator"] = p.generator_identity;
  row["template_version"] = p.template_version;
  row["created_at"] = p.created_at;
  return row.dump();
}

PreferencePair pair_from_json_line(std::string_view line) {
  const auto row = nlohmann::json::parse(line);
  PreferencePair p;
  p.source_id = row.at("source_id").get<std::string>();
  p.style = parse_prompt_style(row.at("style").get<std::string>());
  p.prompt_text = row.at("prompt_text").get<std::string>();
  p.chosen = row.at("chosen").get<std::string>();
  p.rejected = row.at("rejected").get<std::string>();
  p.generator_identity = row.at("generator").get<std::string>();
  p.template_version = row.at("template_version").get<std::string>();
  p.created_at = row.at("created_at").get<std::string>();
  return p;
}

std::vector<PreferencePair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open preference pairs");
  std::vector<PreferencePair> pairs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      pairs.push_back(pair_from_json_line(line));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(number, "pair", e.what());
    }
  }
  return pairs;
}

std::string format_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t seconds = std::chrono::system_clock::to_time_t(t);
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

namespace {

nlohmann::ordered_json entry_to_json(const CacheEntry& e) {
  nlohmann::ordered_json row;
  row["example_id"] = e.example_id;
  row["template_version"] = e.template_version;
  row["generator"] = e.generator;
  row["request_hash"] = e.request_hash;
  row["response"] = e.response;
  row["verdict"] = to_string(e.verdict);
  row["attempts"] = e.attempts;
  row["created_at"] = e.created_at;
  return row;
}

CacheEntry entry_from_json(const nlohmann::json& row) {
  CacheEntry e;
  e.example_id = row.at("example_id").get<std::string>();
  e.template_version = row.at("template_version").get<std::string>();
  e.generator = row.at("generator").get<std::string>();
  e.request_hash = row.at("request_hash").get<std::string>();
  e.response = row.at("response").get<std::string>();
  e.verdict = parse_rejection_reason(row.at("verdict").get<std::string>());
  e.attempts = row.at("attempts").get<int>();
  e.created_at = row.at("created_at").get<std::string>();
  return e;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) return;  // a missing file is an empty cache
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      CacheEntry e = entry_from_json(nlohmann::json::parse(line));
      Key key{e.example_id, e.template_version, e.generator};
      entries_[std::move(key)] = std::move(e);
    } catch (const std::exception& e) {
      throw MalformedRecord(number, "cache", e.what());
    }
  }
}

std::optional<CacheEntry> ResponseCache::lookup(const std::string& example_id,
                                                const std::string& template_version,
                                                const std::string& generator,
                                                const std::string& request_hash) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(Key{example_id, template_version, generator});
  if (it == entries_.end() || it->second.request_hash != request_hash) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const CacheEntry& entry) {
  std::lock_guard lock(mutex_);
  entries_[Key{entry.example_id, entry.template_version, entry.generator}] = entry;
  if (path_) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw IoError(path_->string(), "cannot append to response cache");
    out << entry_to_json(entry).dump() << '\n';
    out.flush();
  }
}

void ResponseCache::compact() {
  std::lock_guard lock(mutex_);
  if (!path_) return;
  const std::filesystem::path tmp = path_->string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError(tmp.string(), "cannot write response cache");
    for (const auto& [key, entry] : entries_) out << entry_to_json(entry).dump() << '\n';
  }
  std::filesystem::rename(tmp, *path_);
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

RejectedResponse request_rejected(const ExampleRecord& example, GeneratorClient& client,
                                  const RequestOptions& options, ResponseCache* cache) {
  if (options.max_attempts < 1) throw ConfigError("max_attempts", "must be at least 1");
  const std::string request_text = render_rejection_request(example, options.request_template);
  const std::string request_hash = sha256_hex(request_text);
  const std::string generator = client.identity();
  const std::string& version = options.request_template.version;

  if (cache) {
    if (auto hit = cache->lookup(example.id, version, generator, request_hash)) {
      RejectedResponse out;
      out.text = hit->response;
      out.from_cache = true;
      out.created_at = hit->created_at;
      return out;
    }
  }

  RejectedResponse out;
  GenerationRequest request{request_text, example.id, options.decode};
  for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
    std::string candidate = client.generate(request);
    const RejectionVerdict verdict = validate_rejected(example, candidate);
    out.verdicts.push_back(verdict.reason);
    out.attempts = attempt;
    if (verdict.accepted) {
      out.text = trim(nfc(candidate));
      out.created_at = format_timestamp(options.clock());
      if (cache) {
        cache->store(CacheEntry{example.id, version, generator, request_hash, out.text,
                                RejectionReason::Ok, attempt, out.created_at});
      }
      return out;
    }
  }
  throw GenerationExhausted(example.id, out.verdicts.back(), options.max_attempts);
}

PreferenceDataset build_preference_dataset(const std::vector<ExampleRecord>& train_records,
                                           PromptStyle style, GeneratorClient& client,
                                           ResponseCache& cache, const BuildOptions& options) {
  for (const auto& r : train_records) {
    if (r.split != Split::Train) {
      throw Error("preference", r.id, "record '" + r.id + "' is not from the train split");
    }
  }
  PreferenceDataset dataset;
  dataset.generator_identity = client.identity();
  dataset.template_version = options.request_template.version;
  dataset.style = style;

  const std::size_t n = train_records.size();
  std::vector<std::optional<RejectedResponse>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = request_rejected(train_records[i], client, options, &cache);
      } catch (...) {
        errors[i] = std::current_exception();
        stop.store(true);
      }
    }
  };

  const std::size_t workers = std::min<std::size_t>(std::max(options.parallelism, 1), n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  dataset.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ExampleRecord& r = train_records[i];
    const RejectedResponse& res = *results[i];
    if (res.from_cache) {
      ++dataset.cached;
    } else {
      ++dataset.generated;
    }
    for (RejectionReason v : res.verdicts) ++dataset.verdicts[v];
    PreferencePair pair;
    pair.source_id = r.id;
    pair.style = style;
    pair.prompt_text = render(r, style).prompt_text;
    pair.chosen = r.counter_narrative;
    pair.rejected = res.text;
    pair.generator_identity = dataset.generator_identity;
    pair.template_version = dataset.template_version;
    pair.created_at = res.created_at;
    dataset.pairs.push_back(std::move(pair));
  }
  if (dataset.generated > 0) cache.compact();
  return dataset;
}

std::filesystem::path write_preference_dataset(const std::filesystem::path& dir,
                                               const PreferenceDataset& dataset) {
  std::filesystem::create_directories(dir);
  const auto pairs_path = dir / "pairs.jsonl";
  std::string pairs_text;
  for (const auto& p : dataset.pairs) pairs_text += pair_to_json_line(p) + '\n';
  {
    std::ofstream out(pairs_path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError(pairs_path.string(), "cannot write preference pairs");
    out << pairs_text;
  }
  nlohmann::ordered_json manifest;
  manifest["pairs_file"] = "pairs.jsonl";
  manifest["pair_count"] = dataset.pairs.size();
  manifest["style"] = to_string(dataset.style);
  manifest["generator"] = dataset.generator_identity;
  manifest["template_version"] = dataset.template_version;
  manifest["pairs_sha256"] = sha256_hex(pairs_text);
  const auto manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoError(manifest_path.string(), "cannot write manifest");
  out << manifest.dump(2) << '\n';
  return manifest_path;
}

}  // namespace cnalign
