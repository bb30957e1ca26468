#pragma once

// Markdown and CSV renderings of an EvalReport. Output is a pure function
// of the report, so identical reports produce identical bytes.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsens/format.hpp"
#include "evsens/harness.hpp"

namespace evsens {

enum class ReportFormat { Markdown, Csv };

namespace report_detail {

inline std::string md_cell(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n') {
      out += "<br>";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_field(fields[i]);
  }
  return out + "\n";
}

inline std::string opt_label(const std::optional<ConclusionLabel>& l) {
  return l ? std::string(to_display(*l)) : "n/a";
}

inline std::string md_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + md_cell(c) + " |";
  return out + "\n";
}

inline std::string md_rule(std::size_t n) {
  std::string out = "|";
  for (std::size_t i = 0; i < n; ++i) out += " --- |";
  return out + "\n";
}

}  // namespace report_detail

inline std::string render_markdown(const EvalReport& r) {
  using namespace report_detail;
  std::string out = "# Sensitivity analysis evaluation\n\n";

  out += "## E-value bias (reported minus true E-value)\n\n";
  std::vector<std::string> head = {"Study", "Exposure", "Outcome", "Effect size", "True E-value"};
  head.insert(head.end(), r.providers.begin(), r.providers.end());
  out += md_row(head) + md_rule(head.size());
  for (const auto& c : r.cases.cases) {
    const auto truth = r.bias_for(c.case_id, r.providers.front())->truth_evalue;
    std::vector<std::string> row = {c.study_name, c.exposure, c.outcome, fmt::shortest(c.estimate.value),
                                    fmt::shortest(truth) + (c.truth_evalue ? "" : " (computed)")};
    for (const auto& p : r.providers) {
      const auto* b = r.bias_for(c.case_id, p);
      row.push_back(b->bias ? fmt::fixed(*b->bias, 2) : "n/a");
    }
    out += md_row(row);
  }

  out += "\n## Conclusions\n\n";
  head = {"Study", "Exposure", "Outcome", "Effect size", "E-value"};
  head.insert(head.end(), r.providers.begin(), r.providers.end());
  head.push_back("Study conclusion");
  out += md_row(head) + md_rule(head.size());
  for (const auto& c : r.cases.cases) {
    const auto truth = r.bias_for(c.case_id, r.providers.front())->truth_evalue;
    std::vector<std::string> row = {c.study_name, c.exposure, c.outcome, fmt::shortest(c.estimate.value),
                                    fmt::shortest(truth)};
    for (const auto& p : r.providers) row.push_back(opt_label(r.conclusion_for(c.case_id, p)->label));
    row.push_back(opt_label(c.truth_conclusion));
    out += md_row(row);
  }

  out += "\n## Suggested unmeasured confounders\n\n";
  head = {"Study", "Exposures", "Outcomes"};
  head.insert(head.end(), r.providers.begin(), r.providers.end());
  out += md_row(head) + md_rule(head.size());
  for (const auto& study : r.cases.studies()) {
    std::vector<std::string> exposures, outcomes;
    for (const auto& c : r.cases.cases) {
      if (c.study_name != study) continue;
      if (std::find(exposures.begin(), exposures.end(), c.exposure) == exposures.end()) exposures.push_back(c.exposure);
      if (std::find(outcomes.begin(), outcomes.end(), c.outcome) == outcomes.end()) outcomes.push_back(c.outcome);
    }
    auto join = [](const std::vector<std::string>& v, const std::string& sep) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
      return s;
    };
    std::vector<std::string> row = {study, join(exposures, "; "), join(outcomes, "; ")};
    for (const auto& p : r.providers) {
      const auto* cell = r.confounders_for(study, p);
      std::vector<std::string> numbered;
      for (std::size_t i = 0; i < cell->confounders.size(); ++i) {
        numbered.push_back(std::to_string(i + 1) + ". " + cell->confounders[i]);
      }
      row.push_back(numbered.empty() ? "n/a" : join(numbered, "\n"));
    }
    out += md_row(row);
  }

  out += "\n## Summary\n\n";
  head = {"Provider", "Pairs", "E-values parsed", "Exact matches", "Max abs bias", "Unlikely", "Possibly",
          "Highly likely", "No label", "Agrees with study conclusion"};
  out += md_row(head) + md_rule(head.size());
  for (const auto& s : r.summary) {
    auto count = [&](ConclusionLabel l) {
      auto it = s.label_counts.find(l);
      return std::to_string(it == s.label_counts.end() ? 0 : it->second);
    };
    out += md_row({s.provider_id, std::to_string(s.pairs), std::to_string(s.evalues_parsed),
                   std::to_string(s.exact_matches), s.max_abs_bias ? fmt::fixed(*s.max_abs_bias, 2) : "n/a",
                   count(ConclusionLabel::Unlikely), count(ConclusionLabel::Possibly),
                   count(ConclusionLabel::HighlyLikely), std::to_string(s.missing_labels),
                   std::to_string(s.agreement_matched) + "/" + std::to_string(s.agreement_compared)});
  }
  return out;
}

/// File name -> contents, one file per table.
inline std::map<std::string, std::string> render_csv(const EvalReport& r) {
  using namespace report_detail;
  std::map<std::string, std::string> files;

  std::string bias = csv_row({"case_id", "provider_id", "reported_evalue", "truth_evalue", "bias"});
  for (const auto& b : r.bias_table) {
    bias += csv_row({b.case_id, b.provider_id, b.reported_evalue ? fmt::shortest(*b.reported_evalue) : "",
                     fmt::shortest(b.truth_evalue), b.bias ? fmt::shortest(*b.bias) : ""});
  }
  files["bias.csv"] = bias;

  std::string concl = csv_row({"case_id", "provider_id", "conclusion", "truth_conclusion"});
  for (const auto& c : r.conclusion_matrix) {
    const auto* sc = r.cases.find(c.case_id);
    concl += csv_row({c.case_id, c.provider_id, c.label ? std::string(to_key(*c.label)) : "",
                      sc && sc->truth_conclusion ? std::string(to_key(*sc->truth_conclusion)) : ""});
  }
  files["conclusions.csv"] = concl;

  std::string conf = csv_row({"study_name", "provider_id", "source_case_id", "rank", "confounder"});
  for (const auto& c : r.confounder_table) {
    for (std::size_t i = 0; i < c.confounders.size(); ++i) {
      conf += csv_row({c.study_name, c.provider_id, c.source_case_id, std::to_string(i + 1), c.confounders[i]});
    }
  }
  files["confounders.csv"] = conf;

  std::string sum = csv_row({"provider_id", "pairs", "evalues_parsed", "exact_matches", "max_abs_bias",
                             "unlikely", "possibly", "highly_likely", "no_label", "agreement_matched",
                             "agreement_compared"});
  for (const auto& s : r.summary) {
    auto count = [&](ConclusionLabel l) {
      auto it = s.label_counts.find(l);
      return std::to_string(it == s.label_counts.end() ? 0 : it->second);
    };
    sum += csv_row({s.provider_id, std::to_string(s.pairs), std::to_string(s.evalues_parsed),
                    std::to_string(s.exact_matches), s.max_abs_bias ? fmt::shortest(*s.max_abs_bias) : "",
                    count(ConclusionLabel::Unlikely), count(ConclusionLabel::Possibly),
                    count(ConclusionLabel::HighlyLikely), std::to_string(s.missing_labels),
                    std::to_string(s.agreement_matched), std::to_string(s.agreement_compared)});
  }
  files["summary.csv"] = sum;
  return files;
}

/// Writes the report under `dir` and returns the written paths.
inline std::vector<std::filesystem::path> emit_report(const EvalReport& r, ReportFormat format,
                                                      const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::IoError, "cannot create output directory " + dir.string() +
                                        (ec ? ": " + ec.message() : std::string()));
  }
  std::vector<std::filesystem::path> written;
  if (format == ReportFormat::Markdown) {
    written.push_back(dir / "report.md");
    write_text_file(written.back(), render_markdown(r));
  } else {
    for (const auto& [name, text] : render_csv(r)) {
      written.push_back(dir / name);
      write_text_file(written.back(), text);
    }
  }
  return written;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  using ojson = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
  ojson j;
  j["providers"] = r.providers;
  j["bias_table"] = ojson::array();
  for (const auto& b : r.bias_table) {
    j["bias_table"].push_back({{"case_id", b.case_id},
                               {"provider_id", b.provider_id},
                               {"reported_evalue", opt(b.reported_evalue)},
                               {"truth_evalue", b.truth_evalue},
                               {"bias", opt(b.bias)}});
  }
  j["conclusion_matrix"] = ojson::array();
  for (const auto& c : r.conclusion_matrix) {
    j["conclusion_matrix"].push_back({{"case_id", c.case_id},
                                      {"provider_id", c.provider_id},
                                      {"conclusion", c.label ? ojson(std::string(to_key(*c.label))) : ojson(nullptr)}});
  }
  j["confounder_table"] = ojson::array();
  for (const auto& c : r.confounder_table) {
    j["confounder_table"].push_back({{"study_name", c.study_name},
                                     {"provider_id", c.provider_id},
                                     {"source_case_id", c.source_case_id},
                                     {"confounders", c.confounders}});
  }
  j["summary"] = ojson::array();
  for (const auto& s : r.summary) {
    ojson labels = ojson::object();
    for (auto l : {ConclusionLabel::Unlikely, ConclusionLabel::Possibly, ConclusionLabel::HighlyLikely}) {
      auto it = s.label_counts.find(l);
      labels[std::string(to_key(l))] = it == s.label_counts.end() ? 0 : it->second;
    }
    j["summary"].push_back({{"provider_id", s.provider_id},
                            {"pairs", s.pairs},
                            {"evalues_parsed", s.evalues_parsed},
                            {"exact_matches", s.exact_matches},
                            {"max_abs_bias", opt(s.max_abs_bias)},
                            {"label_counts", labels},
                            {"missing_labels", s.missing_labels},
                            {"agreement_matched", s.agreement_matched},
                            {"agreement_compared", s.agreement_compared}});
  }
  j["errors"] = ojson::array();
  for (const auto& o : r.outcomes) {
    if (o.error) j["errors"].push_back({{"case_id", o.case_id}, {"provider_id", o.provider_id}, {"error", *o.error}});
  }
  return j;
}

/// Rebuilds the tables of a report from its JSON form. Case metadata is
/// taken from `cases`.
inline EvalReport report_from_json(const nlohmann::json& j, const CaseSet& cases) {
  EvalReport r;
  r.cases = cases;
  r.providers = j.at("providers").get<std::vector<std::string>>();
  auto opt = [](const nlohmann::json& v) { return v.is_null() ? std::optional<double>() : v.get<double>(); };
  for (const auto& b : j.at("bias_table")) {
    const auto* c = cases.find(b.at("case_id").get<std::string>());
    r.bias_table.push_back({b.at("case_id"), b.at("provider_id"), opt(b.at("reported_evalue")),
                            b.at("truth_evalue").get<double>(), c && c->truth_evalue.has_value(),
                            opt(b.at("bias"))});
  }
  for (const auto& c : j.at("conclusion_matrix")) {
    std::optional<ConclusionLabel> l;
    if (!c.at("conclusion").is_null()) l = parse_label_key(c.at("conclusion").get<std::string>());
    r.conclusion_matrix.push_back({c.at("case_id"), c.at("provider_id"), l});
  }
  for (const auto& c : j.at("confounder_table")) {
    r.confounder_table.push_back({c.at("study_name"), c.at("provider_id"), c.at("source_case_id"),
                                  c.at("confounders").get<std::vector<std::string>>()});
  }
  r.summary = summarize(r);
  return r;
}

}  // namespace evsens
