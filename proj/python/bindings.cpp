#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cnalign/corpus.hpp"
#include "cnalign/errors.hpp"
#include "cnalign/losses.hpp"
#include "cnalign/metrics.hpp"
#include "cnalign/pipeline.hpp"
#include "cnalign/preference.hpp"
#include "cnalign/prompting.hpp"
#include "cnalign/report.hpp"
#include "cnalign/text.hpp"

namespace py = pybind11;
using namespace cnalign;

namespace {

ExampleRecord record_from(const py::dict& d) {
  ExampleRecord r;
  r.id = d.contains("id") ? d["id"].cast<std::string>() : "";
  r.language = d.contains("language") ? parse_language(d["language"].cast<std::string>()) : Language::En;
  r.hate_speech = d["hate_speech"].cast<std::string>();
  r.counter_narrative = d["counter_narrative"].cast<std::string>();
  r.knowledge = d["knowledge"].cast<std::vector<std::string>>();
  r.split = d.contains("split") ? parse_split(d["split"].cast<std::string>()) : Split::Train;
  return r;
}

py::dict record_to(const ExampleRecord& r) {
  py::dict d;
  d["id"] = r.id;
  d["language"] = to_string(r.language);
  d["hate_speech"] = r.hate_speech;
  d["knowledge"] = r.knowledge;
  d["counter_narrative"] = r.counter_narrative;
  d["split"] = to_string(r.split);
  return d;
}

py::dict report_to(const MetricReport& r) {
  py::dict d;
  d["language"] = to_string(r.language);
  d["run"] = r.run;
  d["judgelm"] = r.judge_rating;
  d["rouge_l"] = r.rouge_l;
  d["bleu"] = r.bleu2;
  d["bert_score"] = r.bert_score_f;
  d["gen_len"] = r.gen_len;
  d["novelty"] = r.novelty;
  return d;
}

MetricReport report_from(const py::dict& d) {
  MetricReport r;
  r.language = parse_language(d["language"].cast<std::string>());
  r.run = d["run"].cast<std::string>();
  r.judge_rating = d["judgelm"].cast<double>();
  r.rouge_l = d["rouge_l"].cast<double>();
  r.bleu2 = d["bleu"].cast<double>();
  r.bert_score_f = d["bert_score"].cast<double>();
  r.gen_len = d["gen_len"].cast<double>();
  r.novelty = d["novelty"].cast<double>();
  return r;
}

}  // namespace

PYBIND11_MODULE(_cnalign, m) {
  m.doc() = "Counter-narrative alignment pipeline core";

  py::register_exception<Error>(m, "CnalignError");

  m.def("load_corpus", [](const std::filesystem::path& path, const std::string& language) {
    const Corpus c = load_corpus(path, parse_language(language));
    py::list out;
    for (const auto& r : c.records()) out.append(record_to(r));
    return out;
  }, py::arg("path"), py::arg("language"));

  m.def("split_stats", [](const std::filesystem::path& path, const std::string& language) {
    const SplitStats s = validate_splits(load_corpus(path, parse_language(language)));
    py::dict d;
    for (Split split : kSplits) {
      d[py::str(to_string(split))] = py::make_tuple(s.count(split), s.fraction(split));
    }
    return d;
  }, py::arg("path"), py::arg("language"));

  m.def("render", [](const py::dict& record, const std::string& style) {
    const RenderedExample r = render(record_from(record), parse_prompt_style(style));
    py::dict d;
    d["prompt_text"] = r.prompt_text;
    d["target_text"] = r.target_text;
    d["full_text"] = r.full_text;
    return d;
  }, py::arg("record"), py::arg("style") = "base");

  m.def("extract_completion", [](const std::string& text, const std::string& style) {
    return extract_completion(text, parse_prompt_style(style));
  }, py::arg("text"), py::arg("style") = "base");

  m.def("validate_rejected", [](const py::dict& record, const std::string& candidate) {
    return to_string(validate_rejected(record_from(record), candidate).reason);
  }, py::arg("record"), py::arg("candidate"));

  m.def("sft_loss", [](const std::vector<double>& logprobs, std::optional<std::vector<std::uint8_t>> mask) {
    return mask ? sft_loss(logprobs, *mask) : sft_loss(logprobs);
  }, py::arg("logprobs"), py::arg("mask") = py::none());

  m.def("dpo_loss", [](double pc, double pr, double rc, double rr, double beta) {
    const LossStats s = dpo_loss(pc, pr, rc, rr, beta);
    py::dict d;
    d["loss"] = s.loss;
    d["margin"] = s.margin;
    d["reward_accuracy"] = s.reward_accuracy;
    return d;
  }, py::arg("policy_chosen"), py::arg("policy_rejected"), py::arg("reference_chosen"),
     py::arg("reference_rejected"), py::arg("beta"));

  const auto tok = std::make_shared<WhitespaceTokenizer>();
  m.def("tokenize", [tok](const std::string& text) { return tok->tokenize(text); }, py::arg("text"));
  m.def("bleu2", [tok](const std::string& c, const std::string& r) { return bleu2(c, r, *tok); },
        py::arg("candidate"), py::arg("reference"));
  m.def("rouge_l", [tok](const std::string& c, const std::string& r) { return rouge_l(c, r, *tok); },
        py::arg("candidate"), py::arg("reference"));
  m.def("novelty", [tok](const std::string& c, const std::vector<std::string>& training) {
    return novelty(c, training, *tok);
  }, py::arg("candidate"), py::arg("training_cns"));
  m.def("gen_len", [tok](const std::string& c) { return gen_len(c, *tok); }, py::arg("candidate"));

  m.def("emit_report", [](const std::vector<py::dict>& rows) {
    std::vector<MetricReport> reports;
    for (const auto& r : rows) reports.push_back(report_from(r));
    const EmittedReport e = emit_report(reports);
    return py::make_tuple(e.table, e.sidecar);
  }, py::arg("rows"));

  m.def("parse_report_table", [](const std::string& table) {
    py::list out;
    for (const auto& r : parse_report_table(table)) out.append(report_to(r));
    return out;
  }, py::arg("table"));

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"));
}
