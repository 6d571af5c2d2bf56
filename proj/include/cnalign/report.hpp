#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "cnalign/corpus.hpp"
#include "cnalign/embedding.hpp"
#include "cnalign/metrics.hpp"

namespace cnalign {

/// One row of the comparative table. Percent fields are in [0, 100];
/// every value is rounded to one decimal.
struct MetricReport {
  Language language = Language::En;
  std::string run;
  double judge_rating = 0.0;
  double rouge_l = 0.0;
  double bleu2 = 0.0;
  double bert_score_f = 0.0;
  double gen_len = 0.0;
  double novelty = 0.0;

  bool operator==(const MetricReport&) const = default;
};

enum class ReportColumn { JudgeLM, RougeL, Bleu, BertScore, GenLen, Novelty };
inline constexpr std::size_t kReportColumns = 6;

double column_value(const MetricReport& report, ReportColumn column);

double round1(double value);

/// Arithmetic means of per-example metrics over aligned outputs; the judge
/// rating is left at 0 for the tournament to fill in. Throws
/// MisalignedOutputs on a length mismatch and EmptyCorpus for no records.
MetricReport evaluate_run(const std::vector<std::string>& outputs,
                          const std::vector<ExampleRecord>& records,
                          const std::vector<std::string>& training_cns, const Tokenizer& tok,
                          const EmbeddingBackend& emb, std::string run_label);

struct EmittedReport {
  std::string table;    // human-readable, maxima in **bold**
  std::string sidecar;  // one JSON object per line
};

/// Rows grouped by language (English, Basque, Italian, Spanish), input order
/// within a language. Per-language column maxima are marked, ties included.
EmittedReport emit_report(const std::vector<MetricReport>& reports);

/// maxima[i][c] is true when reports[i] holds the per-language maximum of column c.
std::vector<std::array<bool, kReportColumns>> column_maxima(const std::vector<MetricReport>& reports);

/// Reports in emitted (grouped) order.
std::vector<MetricReport> grouped(const std::vector<MetricReport>& reports);

std::vector<MetricReport> parse_report_sidecar(std::string_view sidecar);
std::vector<MetricReport> parse_report_table(std::string_view table);

}  // namespace cnalign
