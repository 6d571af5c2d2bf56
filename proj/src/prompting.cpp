#include "cnalign/prompting.hpp"

#include <fstream>
#include <sstream>

#include "cnalign/errors.hpp"
#include "cnalign/text.hpp"

namespace cnalign {

const std::string_view kTaskInstruction =
    "Below contains a HS (hate speech) and a KN (knowledge). Based on the knowledge, write a CN "
    "(counter narrative) to contradict the hate speech within 50 words.";

namespace {

constexpr std::string_view kSystemPreamble = "You are an AI assistant. ";
constexpr std::string_view kPlaceholder = "{hate_speech}";
constexpr std::string_view kBaseCue = "CN:";
constexpr std::string_view kInstructCnPrefix = "[CN]";

std::string assistant_header() {
  return std::string(markers::kStartHeader) + "assistant" + std::string(markers::kEndHeader);
}

// Version 1 of the rejected-response request. Kept in sync with
// assets/templates/rejection_request_v1.txt.
constexpr std::string_view kBuiltinRejectionBody =
    "Write a short response of one to three sentences that supports and agrees with the "
    "following hate speech (HS). Express the same stance in your own words without repeating "
    "its content. Reply with the response only.\n"
    "\n"
    "HS: {hate_speech}";

}  // namespace

std::string to_string(PromptStyle style) {
  return style == PromptStyle::Base ? "base" : "instruct";
}

PromptStyle parse_prompt_style(std::string_view name) {
  if (name == "base") return PromptStyle::Base;
  if (name == "instruct") return PromptStyle::Instruct;
  throw ConfigError("style", "expected base or instruct, got '" + std::string(name) + "'");
}

std::string_view terminator(PromptStyle style) {
  return style == PromptStyle::Base ? markers::kEndOfText : markers::kEndOfTurn;
}

std::string render_target(PromptStyle style, std::string_view counter_narrative) {
  std::string out;
  if (style == PromptStyle::Instruct) {
    out.append(kInstructCnPrefix).append(" ");
  }
  out.append(counter_narrative).append(terminator(style));
  return out;
}

RenderedExample render_base(const ExampleRecord& example) {
  RenderedExample out;
  out.style = PromptStyle::Base;
  out.source_id = example.id;
  std::string& p = out.prompt_text;
  p.append(kTaskInstruction).append("\n\n");
  p.append("HS:\n\n").append(example.hate_speech).append("\n\n");
  p.append("KN:\n\n").append(example.knowledge_text()).append("\n\n");
  p.append(kBaseCue).append("\n\n");
  out.target_text = render_target(PromptStyle::Base, example.counter_narrative);
  out.full_text = out.prompt_text + out.target_text;
  return out;
}

RenderedExample render_instruct(const ExampleRecord& example) {
  using namespace markers;
  RenderedExample out;
  out.style = PromptStyle::Instruct;
  out.source_id = example.id;
  std::string& p = out.prompt_text;
  // The reference layout puts a space before "system" and "user" but not
  // before "assistant"; kept byte-for-byte.
  p.append(kBeginOfText).append(kStartHeader).append(" system").append(kEndHeader).append("\n\n");
  p.append(kSystemPreamble).append(kTaskInstruction).append(kEndOfTurn);
  p.append(kStartHeader).append(" user").append(kEndHeader).append("\n\n");
  p.append("[HS] ").append(example.hate_speech).append(" [KN] ").append(example.knowledge_text());
  p.append(kEndOfTurn).append(assistant_header()).append("\n\n");
  out.target_text = render_target(PromptStyle::Instruct, example.counter_narrative);
  out.full_text = out.prompt_text + out.target_text;
  return out;
}

RenderedExample render(const ExampleRecord& example, PromptStyle style) {
  return style == PromptStyle::Base ? render_base(example) : render_instruct(example);
}

std::string extract_completion(std::string_view full_text, PromptStyle style) {
  std::size_t start = std::string_view::npos;
  if (style == PromptStyle::Base) {
    // The cue must open a line.
    if (full_text.substr(0, kBaseCue.size()) == kBaseCue) {
      start = kBaseCue.size();
    } else {
      const std::string needle = "\n" + std::string(kBaseCue);
      const std::size_t pos = full_text.find(needle);
      if (pos != std::string_view::npos) start = pos + needle.size();
    }
    if (start == std::string_view::npos) throw MissingCue(std::string(kBaseCue));
  } else {
    const std::string header = assistant_header();
    const std::size_t pos = full_text.find(header);
    if (pos == std::string_view::npos) throw MissingCue(header);
    start = pos + header.size();
  }

  std::string_view rest = full_text.substr(start);
  const std::size_t end = rest.find(terminator(style));
  if (end != std::string_view::npos) rest = rest.substr(0, end);
  std::string completion = trim(rest);
  if (style == PromptStyle::Instruct && completion.starts_with(kInstructCnPrefix)) {
    completion = trim(std::string_view(completion).substr(kInstructCnPrefix.size()));
  }
  return completion;
}

RejectionTemplate RejectionTemplate::builtin() {
  return RejectionTemplate{"reject-v1", std::string(kBuiltinRejectionBody)};
}

RejectionTemplate RejectionTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open template");
  std::string header;
  std::getline(in, header);
  constexpr std::string_view kVersionKey = "version:";
  if (!header.starts_with(kVersionKey)) {
    throw ConfigError(path.string(), "template must start with 'version: <label>'");
  }
  RejectionTemplate tmpl;
  tmpl.version = trim(std::string_view(header).substr(kVersionKey.size()));
  std::stringstream body;
  body << in.rdbuf();
  tmpl.body = trim(body.str());
  if (tmpl.version.empty()) throw ConfigError(path.string(), "empty template version");
  if (count_occurrences(tmpl.body, kPlaceholder) != 1) {
    throw ConfigError(path.string(), "template body needs exactly one {hate_speech} placeholder");
  }
  return tmpl;
}

std::string render_rejection_request(const ExampleRecord& example, const RejectionTemplate& tmpl) {
  std::string out = tmpl.body;
  const std::size_t pos = out.find(kPlaceholder);
  if (pos == std::string::npos) {
    throw ConfigError("template " + tmpl.version, "missing {hate_speech} placeholder");
  }
  out.replace(pos, kPlaceholder.size(), example.hate_speech);
  return out;
}

}  // namespace cnalign
