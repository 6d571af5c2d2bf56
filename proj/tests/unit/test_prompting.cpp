#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cnalign/corpus.hpp"
#include "cnalign/errors.hpp"
#include "cnalign/prompting.hpp"
#include "cnalign/text.hpp"

using namespace cnalign;
namespace fs = std::filesystem;

namespace {

ExampleRecord sample() {
  ExampleRecord r;
  r.id = "s1";
  r.hate_speech = "Group X ruins everything.";
  r.knowledge = {"Group X volunteers.", "Data show support."};
  r.counter_narrative = "Group X volunteers widely, as data show.";
  return r;
}

}  // namespace

TEST_CASE("base prompt layout") {
  const auto r = render_base(sample());
  CHECK(r.prompt_text.rfind(std::string(kTaskInstruction), 0) == 0);
  CHECK(r.prompt_text.ends_with("\n\nCN:\n\n"));
  CHECK(r.target_text == sample().counter_narrative + "<end_of_text>");
  CHECK(r.full_text == r.prompt_text + r.target_text);
  CHECK(r.source_id == "s1");
  CHECK(count_occurrences(r.full_text, "HS:") == 1);
}

TEST_CASE("instruct prompt layout") {
  const auto r = render_instruct(sample());
  CHECK(r.prompt_text.rfind("<|begin_of_text|>", 0) == 0);
  CHECK(r.prompt_text.find("[HS] Group X ruins everything. [KN] Group X volunteers. Data show support.") !=
        std::string::npos);
  CHECK(r.target_text == "[CN] " + sample().counter_narrative + "<|eot_id|>");
  CHECK(count_occurrences(r.full_text, "<|eot_id|>") == 3);
}

TEST_CASE("completion extraction") {
  for (auto style : {PromptStyle::Base, PromptStyle::Instruct}) {
    const auto r = render(sample(), style);
    CHECK(extract_completion(r.full_text, style) == sample().counter_narrative);
    // Generation that runs past the terminator is cut.
    CHECK(extract_completion(r.full_text + " trailing junk", style) == sample().counter_narrative);
    // Without a terminator everything after the cue counts.
    CHECK(extract_completion(r.prompt_text + "partial answer", style) == "partial answer");
  }
  CHECK_THROWS_AS(extract_completion("no cue here", PromptStyle::Base), MissingCue);
  CHECK_THROWS_AS(extract_completion("HS:\n\nfoo", PromptStyle::Instruct), MissingCue);
}

TEST_CASE("style names") {
  CHECK(parse_prompt_style("instruct") == PromptStyle::Instruct);
  CHECK(to_string(PromptStyle::Base) == "base");
  CHECK_THROWS_AS(parse_prompt_style("chat"), ConfigError);
}

TEST_CASE("rejection templates") {
  const auto builtin = RejectionTemplate::builtin();
  CHECK(count_occurrences(builtin.body, "{hate_speech}") == 1);
  const std::string req = render_rejection_request(sample());
  CHECK(count_occurrences(req, sample().hate_speech) == 1);
  CHECK(req.find("{hate_speech}") == std::string::npos);

  const fs::path asset = fs::path(CNALIGN_ASSETS_DIR) / "templates" / "rejection_request_v1.txt";
  const auto loaded = RejectionTemplate::load(asset);
  CHECK(loaded.version == builtin.version);
  CHECK(loaded.body == builtin.body);

  const fs::path bad = fs::temp_directory_path() / "cnalign-bad-template.txt";
  std::ofstream(bad) << "no version header\n{hate_speech}\n";
  CHECK_THROWS_AS(RejectionTemplate::load(bad), ConfigError);
  fs::remove(bad);
}
