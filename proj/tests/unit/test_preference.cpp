#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cnalign/errors.hpp"
#include "cnalign/preference.hpp"
#include "cnalign/text.hpp"
#include "../support/oracles.hpp"

using namespace cnalign;
namespace fs = std::filesystem;

namespace {

using Responses = std::map<std::string, std::vector<std::string>>;

ExampleRecord example(const std::string& id = "e1") {
  ExampleRecord r;
  r.id = id;
  r.hate_speech = "one two three four five six seven eight nine ten";
  r.knowledge = {"Knowledge sentence."};
  r.counter_narrative = "A calm and factual reply.";
  return r;
}

std::chrono::system_clock::time_point fixed_time() {
  return std::chrono::system_clock::time_point(std::chrono::seconds(1700000000));
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cnalign-pref-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("rejected-response validation order") {
  const auto r = example();
  CHECK(validate_rejected(r, "  \n") == RejectionVerdict{false, RejectionReason::Empty});
  CHECK(validate_rejected(r, " A calm and factual reply. ") == RejectionVerdict{false, RejectionReason::EqualsChosen});
  CHECK(validate_rejected(r, "so: two three four five six seven eight nine right") ==
        RejectionVerdict{false, RejectionReason::RepeatsHs});
  CHECK(validate_rejected(r, "two three four five six seven eight").accepted);  // only 7 in a row
  std::string long_text;
  for (int i = 0; i < 129; ++i) long_text += "w ";
  CHECK(validate_rejected(r, long_text) == RejectionVerdict{false, RejectionReason::TooLong});
  long_text.resize(long_text.size() - 2);
  CHECK(validate_rejected(r, long_text).accepted);
}

TEST_CASE("short hate speech repeated verbatim is rejected") {
  ExampleRecord r = example();
  r.hate_speech = "They are bad.";
  CHECK(validate_rejected(r, "Well, They are bad. Indeed.").reason == RejectionReason::RepeatsHs);
  CHECK(validate_rejected(r, "They are good.").accepted);
}

TEST_CASE("repeat detection agrees with the sliding-window oracle") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> words = {"a", "b", "c", "d"};
  const WhitespaceTokenizer tok;
  for (int i = 0; i < 3000; ++i) {
    ExampleRecord r = example();
    std::string hs, cand;
    for (int k = 1 + static_cast<int>(rng() % 12); k > 0; --k) hs += words[rng() % 4] + " ";
    for (int k = 1 + static_cast<int>(rng() % 20); k > 0; --k) cand += words[rng() % 4] + " ";
    r.hate_speech = hs;
    r.counter_narrative = "zzz";
    const bool repeats = oracle::repeats_window(tok.tokenize(cand), tok.tokenize(hs), kRepeatWindow);
    CHECK((validate_rejected(r, cand).reason == RejectionReason::RepeatsHs) == repeats);
  }
}

TEST_CASE("pairs serialise losslessly") {
  PreferencePair p{"id", PromptStyle::Instruct, "prompt \"quoted\"\n", "chosen ñ", "rejected", "stub:x", "v1",
                   "2023-11-14T22:13:20Z"};
  CHECK(pair_from_json_line(pair_to_json_line(p)) == p);
  CHECK(format_timestamp(fixed_time()) == "2023-11-14T22:13:20Z");
}

TEST_CASE("request_rejected retries until a valid response") {
  StubGeneratorClient stub(Responses{{"e1", {"", "A calm and factual reply.", "Something unrelated."}}});
  RequestOptions options;
  options.clock = fixed_time;
  const auto res = request_rejected(example(), stub, options);
  CHECK(res.text == "Something unrelated.");
  CHECK(res.attempts == 3);
  CHECK(res.verdicts == std::vector<RejectionReason>{RejectionReason::Empty, RejectionReason::EqualsChosen,
                                                      RejectionReason::Ok});
}

TEST_CASE("exhaustion reports the example id and last verdict") {
  StubGeneratorClient stub(Responses{{"e1", {""}}});
  RequestOptions options;
  options.max_attempts = 2;
  try {
    request_rejected(example(), stub, options);
    FAIL("expected GenerationExhausted");
  } catch (const GenerationExhausted& e) {
    CHECK(e.entity() == "e1");
    CHECK(std::string(e.what()).find("EMPTY") != std::string::npos);
  }
  CHECK(stub.calls() == 2);
}

TEST_CASE("cache hits need the same request hash") {
  ResponseCache cache;
  StubGeneratorClient stub(Responses{{"*", {"Fine answer."}}});
  RequestOptions options;
  options.clock = fixed_time;
  CHECK_FALSE(request_rejected(example(), stub, options, &cache).from_cache);
  CHECK(request_rejected(example(), stub, options, &cache).from_cache);
  CHECK(stub.calls() == 1);

  ExampleRecord changed = example();
  changed.hate_speech = "different text entirely";
  CHECK_FALSE(request_rejected(changed, stub, options, &cache).from_cache);
  CHECK(stub.calls() == 2);
}

TEST_CASE("file-backed cache persists accepted responses") {
  const fs::path dir = scratch("cache");
  {
    ResponseCache cache(dir / "cache.jsonl");
    StubGeneratorClient stub(Responses{{"*", {"Fine answer."}}});
    RequestOptions options;
    request_rejected(example("a"), stub, options, &cache);
    request_rejected(example("b"), stub, options, &cache);
  }
  ResponseCache reloaded(dir / "cache.jsonl");
  CHECK(reloaded.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("dataset build is ordered, parallel-safe and cache-aware") {
  std::vector<ExampleRecord> records;
  std::map<std::string, std::vector<std::string>> responses;
  for (int i = 0; i < 40; ++i) {
    records.push_back(example("r" + std::to_string(i)));
    responses["r" + std::to_string(i)] = {"Reply number " + std::to_string(i) + "."};
  }
  BuildOptions options;
  options.parallelism = 8;
  options.clock = fixed_time;
  ResponseCache cache;
  StubGeneratorClient stub(responses);
  const auto ds = build_preference_dataset(records, PromptStyle::Base, stub, cache, options);
  REQUIRE(ds.pairs.size() == 40);
  for (int i = 0; i < 40; ++i) {
    CHECK(ds.pairs[i].source_id == "r" + std::to_string(i));
    CHECK(ds.pairs[i].rejected == "Reply number " + std::to_string(i) + ".");
  }
  CHECK(ds.generated == 40);
  const auto warm = build_preference_dataset(records, PromptStyle::Base, stub, cache, options);
  CHECK(warm.cached == 40);
  CHECK(warm.generated == 0);
  CHECK(stub.calls() == 40);
  CHECK(warm.pairs == ds.pairs);

  const fs::path a = scratch("ds-a"), b = scratch("ds-b");
  write_preference_dataset(a, ds);
  write_preference_dataset(b, warm);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  CHECK(slurp(a / "pairs.jsonl") == slurp(b / "pairs.jsonl"));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest.at("pair_count") == 40);
  CHECK(manifest.at("pairs_sha256") == sha256_hex(slurp(a / "pairs.jsonl")));
  CHECK(load_pairs(a / "pairs.jsonl") == ds.pairs);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("dataset build edge cases") {
  ResponseCache cache;
  StubGeneratorClient stub(Responses{{"*", {"ok reply"}}});
  CHECK(build_preference_dataset({}, PromptStyle::Base, stub, cache).pairs.empty());

  ExampleRecord test_record = example();
  test_record.split = Split::Test;
  CHECK_THROWS_AS(build_preference_dataset({test_record}, PromptStyle::Base, stub, cache), Error);

  // The first failing record in input order is the one reported.
  std::vector<ExampleRecord> records = {example("ok"), example("bad1"), example("bad2")};
  StubGeneratorClient picky(Responses{{"ok", {"fine"}}, {"bad1", {""}}, {"bad2", {""}}});
  BuildOptions options;
  options.parallelism = 3;
  try {
    build_preference_dataset(records, PromptStyle::Base, picky, cache, options);
    FAIL("expected GenerationExhausted");
  } catch (const GenerationExhausted& e) {
    CHECK(e.entity() == "bad1");
  }
}
