#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cnalign/corpus.hpp"

namespace cnalign {

enum class PromptStyle { Base, Instruct };

std::string to_string(PromptStyle style);
/// Accepts "base" or "instruct"; throws ConfigError otherwise.
PromptStyle parse_prompt_style(std::string_view name);

namespace markers {
inline constexpr std::string_view kEndOfText = "<end_of_text>";
inline constexpr std::string_view kBeginOfText = "<|begin_of_text|>";
inline constexpr std::string_view kStartHeader = "<|start_header_id|>";
inline constexpr std::string_view kEndHeader = "<|end_header_id|>";
inline constexpr std::string_view kEndOfTurn = "<|eot_id|>";
}  // namespace markers

/// The instruction paragraph shared by both training formats.
extern const std::string_view kTaskInstruction;

struct RenderedExample {
  std::string prompt_text;
  std::string target_text;
  std::string full_text;
  PromptStyle style = PromptStyle::Base;
  std::string source_id;
};

RenderedExample render_base(const ExampleRecord& example);
RenderedExample render_instruct(const ExampleRecord& example);
RenderedExample render(const ExampleRecord& example, PromptStyle style);

/// Target text for an arbitrary counter narrative (gold or rejected).
std::string render_target(PromptStyle style, std::string_view counter_narrative);

/// Literal end marker that closes a completion in the given style.
std::string_view terminator(PromptStyle style);

/// Recovers the counter narrative from rendered or generated text: the span
/// after the style's CN cue, cut at the terminator, trimmed, with the "[CN]"
/// prefix removed for the instruct format. Throws MissingCue.
std::string extract_completion(std::string_view full_text, PromptStyle style);

/// Request sent to the external generator for a rejected (HS-supporting)
/// response. The body holds exactly one "{hate_speech}" placeholder.
struct RejectionTemplate {
  std::string version;
  std::string body;

  static RejectionTemplate builtin();
  /// File layout: a first line "version: <label>", then the body. Throws
  /// IoError or ConfigError.
  static RejectionTemplate load(const std::filesystem::path& path);
};

std::string render_rejection_request(const ExampleRecord& example,
                                     const RejectionTemplate& tmpl = RejectionTemplate::builtin());

}  // namespace cnalign
