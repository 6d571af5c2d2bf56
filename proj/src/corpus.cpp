#include "cnalign/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "cnalign/errors.hpp"
#include "cnalign/text.hpp"

namespace cnalign {

using nlohmann::json;

std::string to_string(Language language) {
  switch (language) {
    case Language::En: return "en";
    case Language::Eu: return "eu";
    case Language::It: return "it";
    case Language::Es: return "es";
  }
  return "?";
}

std::string display_name(Language language) {
  switch (language) {
    case Language::En: return "English";
    case Language::Eu: return "Basque";
    case Language::It: return "Italian";
    case Language::Es: return "Spanish";
  }
  return "?";
}

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Language parse_language(std::string_view code) {
  for (Language l : kLanguages) {
    if (code == to_string(l)) return l;
  }
  throw UnknownLanguage(std::string(code));
}

Split parse_split(std::string_view name) {
  for (Split s : kSplits) {
    if (name == to_string(s)) return s;
  }
  throw UnknownSplit(std::string(name));
}

std::string ExampleRecord::knowledge_text() const { return join(knowledge, " "); }

void check_record(const ExampleRecord& record) {
  if (trim(record.id).empty()) throw std::invalid_argument("id");
  if (trim(record.hate_speech).empty()) throw std::invalid_argument("hate_speech");
  if (trim(record.counter_narrative).empty()) throw std::invalid_argument("counter_narrative");
  if (record.knowledge.empty()) throw std::invalid_argument("knowledge");
  for (const auto& sentence : record.knowledge) {
    if (trim(sentence).empty()) throw std::invalid_argument("knowledge");
  }
}

Corpus::Corpus(Language language, std::vector<ExampleRecord> records)
    : language_(language), records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    if (r.language != language_) {
      throw Error("corpus", r.id,
                  "record '" + r.id + "' has language " + to_string(r.language) +
                      ", corpus is " + to_string(language_));
    }
    if (!seen.insert(r.id).second) throw DuplicateId(r.id);
  }
}

const ExampleRecord* Corpus::find(std::string_view id) const {
  for (const auto& r : records_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

namespace {

std::string required_text(const json& row, const char* field, std::size_t line) {
  auto it = row.find(field);
  if (it == row.end() || it->is_null()) throw MalformedRecord(line, field, "missing");
  if (!it->is_string()) throw MalformedRecord(line, field, "expected a string");
  std::string value;
  try {
    value = trim(nfc(it->get<std::string>()));
  } catch (const std::invalid_argument&) {
    throw MalformedRecord(line, field, "invalid UTF-8");
  }
  if (value.empty()) throw MalformedRecord(line, field, "empty");
  return value;
}

ExampleRecord parse_record(const std::string& text, std::size_t line, Language expected) {
  json row;
  try {
    row = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedRecord(line, "<record>", e.what());
  }
  if (!row.is_object()) throw MalformedRecord(line, "<record>", "expected a JSON object");

  ExampleRecord r;
  r.id = required_text(row, "id", line);
  r.language = parse_language(required_text(row, "language", line));
  if (r.language != expected) {
    throw MalformedRecord(line, "language",
                          "record is " + to_string(r.language) + ", expected " + to_string(expected));
  }
  r.split = parse_split(required_text(row, "split", line));
  r.hate_speech = required_text(row, "hate_speech", line);
  r.counter_narrative = required_text(row, "counter_narrative", line);

  auto kn = row.find("knowledge");
  if (kn == row.end() || kn->is_null()) throw MalformedRecord(line, "knowledge", "missing");
  if (!kn->is_array()) throw MalformedRecord(line, "knowledge", "expected an array of strings");
  if (kn->empty()) throw MalformedRecord(line, "knowledge", "empty");
  for (const auto& sentence : *kn) {
    if (!sentence.is_string()) throw MalformedRecord(line, "knowledge", "expected an array of strings");
    std::string s = trim(nfc(sentence.get<std::string>()));
    if (s.empty()) throw MalformedRecord(line, "knowledge", "empty sentence");
    r.knowledge.push_back(std::move(s));
  }
  return r;
}

}  // namespace

Corpus parse_corpus(std::istream& in, Language language) {
  std::vector<ExampleRecord> records;
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    ExampleRecord r = parse_record(text, line, language);
    if (!ids.insert(r.id).second) throw DuplicateId(r.id);
    records.push_back(std::move(r));
  }
  return Corpus(language, std::move(records));
}

Corpus load_corpus(const std::filesystem::path& path, Language language) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open corpus file");
  return parse_corpus(in, language);
}

std::string record_to_json_line(const ExampleRecord& r) {
  nlohmann::ordered_json row;
  row["id"] = r.id;
  row["language"] = to_string(r.language);
  row["split"] = to_string(r.split);
  row["hate_speech"] = r.hate_speech;
  row["counter_narrative"] = r.counter_narrative;
  row["knowledge"] = r.knowledge;
  return row.dump();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& r : corpus.records()) out << record_to_json_line(r) << '\n';
}

SplitStats validate_splits(const Corpus& corpus) {
  if (corpus.empty()) throw EmptyCorpus(to_string(corpus.language()));
  SplitStats stats;
  for (const auto& r : corpus.records()) ++stats.counts[static_cast<std::size_t>(r.split)];
  const double total = static_cast<double>(corpus.size());
  for (std::size_t s = 0; s < stats.counts.size(); ++s) {
    stats.percentages[s] = static_cast<double>(stats.counts[s]) / total;
  }
  return stats;
}

std::vector<ExampleRecord> filter_split(const Corpus& corpus, Split split) {
  std::vector<ExampleRecord> out;
  for (const auto& r : corpus.records()) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

}  // namespace cnalign
