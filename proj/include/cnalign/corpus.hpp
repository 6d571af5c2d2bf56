#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cnalign {

enum class Language { En, Eu, It, Es };
enum class Split { Train, Validation, Test };

inline constexpr std::array<Language, 4> kLanguages = {Language::En, Language::Eu, Language::It,
                                                        Language::Es};
inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Validation, Split::Test};

/// Short code: "en", "eu", "it", "es".
std::string to_string(Language language);
/// Display name used in reports: "English", "Basque", ...
std::string display_name(Language language);
std::string to_string(Split split);

/// Throws UnknownLanguage / UnknownSplit.
Language parse_language(std::string_view code);
Split parse_split(std::string_view name);

struct ExampleRecord {
  std::string id;
  Language language = Language::En;
  std::string hate_speech;
  std::string counter_narrative;
  std::vector<std::string> knowledge;
  Split split = Split::Train;

  /// Knowledge sentences joined by a single space.
  std::string knowledge_text() const;

  bool operator==(const ExampleRecord&) const = default;
};

/// Throws std::invalid_argument naming the first violated field.
void check_record(const ExampleRecord& record);

/// Records of a single language with unique ids. Immutable once built.
class Corpus {
 public:
  Corpus(Language language, std::vector<ExampleRecord> records);

  Language language() const noexcept { return language_; }
  const std::vector<ExampleRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// nullptr when absent.
  const ExampleRecord* find(std::string_view id) const;

  bool operator==(const Corpus&) const = default;

 private:
  Language language_;
  std::vector<ExampleRecord> records_;
};

struct SplitStats {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> percentages{};  // fractions in [0, 1]

  std::size_t count(Split split) const { return counts[static_cast<std::size_t>(split)]; }
  double fraction(Split split) const { return percentages[static_cast<std::size_t>(split)]; }
  std::size_t total() const { return counts[0] + counts[1] + counts[2]; }
};

/// Reads one JSON record per line (blank lines skipped). Text fields are
/// NFC-normalized and trimmed. Records must carry the declared language.
Corpus load_corpus(const std::filesystem::path& path, Language language);
Corpus parse_corpus(std::istream& in, Language language);

void write_corpus(std::ostream& out, const Corpus& corpus);
std::string record_to_json_line(const ExampleRecord& record);

/// Throws EmptyCorpus.
SplitStats validate_splits(const Corpus& corpus);

std::vector<ExampleRecord> filter_split(const Corpus& corpus, Split split);

}  // namespace cnalign
