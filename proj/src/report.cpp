#include "cnalign/report.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "cnalign/errors.hpp"

namespace cnalign {

namespace {

constexpr std::array<std::string_view, kReportColumns> kColumnTitles = {
    "JudgeLM", "RougeL (%)", "BLEU (%)", "BERTScore (%)", "Gen Len", "Novelty (%)"};
constexpr std::array<std::string_view, kReportColumns> kSidecarKeys = {
    "judgelm", "rouge_l", "bleu", "bert_score", "gen_len", "novelty"};

void set_column(MetricReport& r, std::size_t column, double value) {
  switch (static_cast<ReportColumn>(column)) {
    case ReportColumn::JudgeLM: r.judge_rating = value; break;
    case ReportColumn::RougeL: r.rouge_l = value; break;
    case ReportColumn::Bleu: r.bleu2 = value; break;
    case ReportColumn::BertScore: r.bert_score_f = value; break;
    case ReportColumn::GenLen: r.gen_len = value; break;
    case ReportColumn::Novelty: r.novelty = value; break;
  }
}

Language language_from_display(std::string_view name) {
  for (Language l : kLanguages) {
    if (display_name(l) == name) return l;
  }
  throw UnknownLanguage(std::string(name));
}

std::string trim_ascii(std::string_view s) {
  const auto begin = s.find_first_not_of(' ');
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(' ');
  return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace

double column_value(const MetricReport& r, ReportColumn column) {
  switch (column) {
    case ReportColumn::JudgeLM: return r.judge_rating;
    case ReportColumn::RougeL: return r.rouge_l;
    case ReportColumn::Bleu: return r.bleu2;
    case ReportColumn::BertScore: return r.bert_score_f;
    case ReportColumn::GenLen: return r.gen_len;
    case ReportColumn::Novelty: return r.novelty;
  }
  return 0.0;
}

double round1(double value) { return std::round(value * 10.0) / 10.0; }

MetricReport evaluate_run(const std::vector<std::string>& outputs,
                          const std::vector<ExampleRecord>& records,
                          const std::vector<std::string>& training_cns, const Tokenizer& tok,
                          const EmbeddingBackend& emb, std::string run_label) {
  if (records.empty()) throw EmptyCorpus("evaluation records for " + run_label);
  if (outputs.size() != records.size()) {
    const std::size_t at = std::min(outputs.size(), records.size());
    throw MisalignedOutputs(at < records.size() ? records[at].id : "<extra output>",
                            std::to_string(outputs.size()) + " outputs for " +
                                std::to_string(records.size()) + " records");
  }
  const NoveltyIndex index(training_cns, tok);
  double rouge = 0, bleu = 0, bert = 0, length = 0, novel = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto cand = tok.tokenize(outputs[i]);
    const auto ref = tok.tokenize(records[i].counter_narrative);
    rouge += rouge_l(cand, ref);
    bleu += bleu2(cand, ref);
    // An empty generation has no tokens to match; it contributes 0.
    bert += cand.empty() ? 0.0 : bert_score_f(cand, ref, emb);
    length += static_cast<double>(cand.size());
    novel += index.novelty(cand);
  }
  const double n = static_cast<double>(records.size());
  MetricReport r;
  r.language = records.front().language;
  r.run = std::move(run_label);
  r.rouge_l = round1(100.0 * rouge / n);
  r.bleu2 = round1(100.0 * bleu / n);
  r.bert_score_f = round1(100.0 * bert / n);
  r.gen_len = round1(length / n);
  r.novelty = round1(100.0 * novel / n);
  return r;
}

std::vector<MetricReport> grouped(const std::vector<MetricReport>& reports) {
  std::vector<MetricReport> out;
  for (Language l : kLanguages) {
    for (const auto& r : reports) {
      if (r.language == l) out.push_back(r);
    }
  }
  return out;
}

std::vector<std::array<bool, kReportColumns>> column_maxima(const std::vector<MetricReport>& reports) {
  std::vector<std::array<bool, kReportColumns>> marks(reports.size());
  for (Language l : kLanguages) {
    for (std::size_t c = 0; c < kReportColumns; ++c) {
      double best = -INFINITY;
      for (const auto& r : reports) {
        if (r.language == l) best = std::max(best, column_value(r, static_cast<ReportColumn>(c)));
      }
      for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports[i].language == l) {
          marks[i][c] = column_value(reports[i], static_cast<ReportColumn>(c)) == best;
        }
      }
    }
  }
  return marks;
}

EmittedReport emit_report(const std::vector<MetricReport>& reports) {
  const auto rows = grouped(reports);
  const auto marks = column_maxima(rows);

  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Language", "Model Name"});
  for (auto title : kColumnTitles) cells.back().emplace_back(title);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool first_of_language = i == 0 || rows[i - 1].language != rows[i].language;
    std::vector<std::string> line{first_of_language ? display_name(rows[i].language) : "", rows[i].run};
    for (std::size_t c = 0; c < kReportColumns; ++c) {
      const std::string value = fmt::format("{:.1f}", column_value(rows[i], static_cast<ReportColumn>(c)));
      line.push_back(marks[i][c] ? "**" + value + "**" : value);
    }
    cells.push_back(std::move(line));
  }

  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
  }

  EmittedReport out;
  auto emit_line = [&](const std::vector<std::string>& line) {
    out.table += "|";
    for (std::size_t c = 0; c < line.size(); ++c) {
      out.table += c < 2 ? fmt::format(" {:<{}} |", line[c], widths[c])
                         : fmt::format(" {:>{}} |", line[c], widths[c]);
    }
    out.table += "\n";
  };
  emit_line(cells.front());
  out.table += "|";
  for (std::size_t c = 0; c < widths.size(); ++c) {
    out.table += c < 2 ? fmt::format(":{:-<{}}|", "", widths[c] + 1) : fmt::format("{:-<{}}:|", "", widths[c] + 1);
  }
  out.table += "\n";
  for (std::size_t i = 1; i < cells.size(); ++i) emit_line(cells[i]);

  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["language"] = to_string(r.language);
    row["run"] = r.run;
    for (std::size_t c = 0; c < kReportColumns; ++c) {
      row[std::string(kSidecarKeys[c])] = column_value(r, static_cast<ReportColumn>(c));
    }
    out.sidecar += row.dump() + "\n";
  }
  return out;
}

std::vector<MetricReport> parse_report_sidecar(std::string_view sidecar) {
  std::vector<MetricReport> out;
  std::istringstream in{std::string(sidecar)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim_ascii(line).empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      MetricReport r;
      r.language = parse_language(row.at("language").get<std::string>());
      r.run = row.at("run").get<std::string>();
      for (std::size_t c = 0; c < kReportColumns; ++c) {
        set_column(r, c, row.at(std::string(kSidecarKeys[c])).get<double>());
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(number, "report", e.what());
    }
  }
  return out;
}

std::vector<MetricReport> parse_report_table(std::string_view table) {
  std::vector<MetricReport> out;
  std::istringstream in{std::string(table)};
  std::string line;
  std::size_t number = 0;
  std::optional<Language> current;
  while (std::getline(in, line)) {
    ++number;
    if (number <= 2 || trim_ascii(line).empty()) continue;  // header and rule
    std::vector<std::string> cells;
    std::size_t start = line.find('|');
    while (start != std::string::npos) {
      const std::size_t end = line.find('|', start + 1);
      if (end == std::string::npos) break;
      cells.push_back(trim_ascii(std::string_view(line).substr(start + 1, end - start - 1)));
      start = end;
    }
    if (cells.size() != 2 + kReportColumns) throw MalformedRecord(number, "table", "wrong cell count");
    if (!cells[0].empty()) current = language_from_display(cells[0]);
    if (!current) throw MalformedRecord(number, "Language", "missing");
    MetricReport r;
    r.language = *current;
    r.run = cells[1];
    for (std::size_t c = 0; c < kReportColumns; ++c) {
      std::string value = cells[2 + c];
      if (value.starts_with("**") && value.ends_with("**") && value.size() >= 4) {
        value = value.substr(2, value.size() - 4);
      }
      try {
        set_column(r, c, std::stod(value));
      } catch (const std::exception&) {
        throw MalformedRecord(number, std::string(kColumnTitles[c]), "not a number: " + value);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cnalign
