#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "cnalign/corpus.hpp"
#include "cnalign/errors.hpp"
#include "cnalign/text.hpp"

using namespace cnalign;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CNALIGN_FIXTURES_DIR;

Corpus parse(const std::string& text, Language lang = Language::En) {
  std::istringstream in(text);
  return parse_corpus(in, lang);
}

const char* kRow =
    R"({"id":"x1","language":"en","hate_speech":"hs","knowledge":["k1.","k2."],"counter_narrative":"cn","split":"train"})";

}  // namespace

TEST_CASE("nfc composes decomposed input and rejects invalid utf-8") {
  CHECK(nfc("e\xCC\x81") == "\xC3\xA9");
  CHECK(nfc("plain ascii") == "plain ascii");
  CHECK_THROWS_AS(nfc("\xFF\xFE"), std::invalid_argument);
}

TEST_CASE("whitespace splitting handles unicode spaces") {
  const auto t = split_whitespace("a\xC2\xA0 b\t\tc　d ");
  CHECK(t == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(split_whitespace("   ").empty());
  CHECK(trim("  x y \n") == "x y");
}

TEST_CASE("sha256 matches the standard test vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("records parse, normalise and round trip") {
  const Corpus c = parse(std::string(kRow) + "\n\n");
  REQUIRE(c.size() == 1);
  const ExampleRecord& r = c.records()[0];
  CHECK(r.knowledge_text() == "k1. k2.");
  CHECK(r.split == Split::Train);
  std::ostringstream out;
  write_corpus(out, c);
  CHECK(parse(out.str()) == c);
}

TEST_CASE("malformed records name the offending field") {
  auto field_of = [](const std::string& text) {
    try {
      parse(text);
    } catch (const MalformedRecord& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"id":"x","language":"en","hate_speech":"","knowledge":["k"],"counter_narrative":"c","split":"train"})") == "hate_speech");
  CHECK(field_of(R"({"id":"x","language":"en","hate_speech":"h","knowledge":[],"counter_narrative":"c","split":"train"})") == "knowledge");
  CHECK(field_of(R"({"id":"x","language":"en","hate_speech":"h","knowledge":["k"],"split":"train"})") == "counter_narrative");
  CHECK(field_of(R"({"id":"x","language":"eu","hate_speech":"h","knowledge":["k"],"counter_narrative":"c","split":"train"})") == "language");
  CHECK(field_of("not json") != "<none>");
}

TEST_CASE("unknown enums and duplicates are rejected") {
  CHECK_THROWS_AS(parse_language("fr"), UnknownLanguage);
  CHECK_THROWS_AS(parse_split("dev"), UnknownSplit);
  CHECK_THROWS_AS(parse(std::string(kRow) + "\n" + kRow + "\n"), DuplicateId);
}

TEST_CASE("split statistics and empty corpora") {
  const Corpus en = load_corpus(kFixtures / "shared_task_en.jsonl", Language::En);
  const SplitStats s = validate_splits(en);
  CHECK(s.total() == 596);
  CHECK(s.count(Split::Train) == 396);
  CHECK(s.fraction(Split::Validation) == doctest::Approx(100.0 / 596));
  CHECK(filter_split(en, Split::Test).size() == 100);
  CHECK_THROWS_AS(validate_splits(parse("")), EmptyCorpus);
  CHECK_THROWS_AS(load_corpus(kFixtures / "missing.jsonl", Language::En), IoError);
}

TEST_CASE("decomposed fixture text is stored in composed form") {
  const Corpus eu = load_corpus(kFixtures / "shared_task_eu.jsonl", Language::Eu);
  for (const auto& r : eu.records()) CHECK(r.counter_narrative == nfc(r.counter_narrative));
  const Corpus it = load_corpus(kFixtures / "shared_task_it.jsonl", Language::It);
  CHECK(it.find("it-003")->counter_narrative.find("perch\xC3\xA9") != std::string::npos);
}
