#pragma once

// Evaluation pipeline: render -> send -> parse -> score for every
// (case, provider) pair, and the bias / conclusion / confounder tables built
// from the results.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "evsens/error.hpp"
#include "evsens/gateway.hpp"
#include "evsens/parser.hpp"
#include "evsens/prompt.hpp"
#include "evsens/sensitivity.hpp"
#include "evsens/study.hpp"

namespace evsens {

/// reported - truth, or nothing when the model gave no usable value.
inline std::optional<double> compute_bias(std::optional<double> reported, double truth) {
  if (!reported) return std::nullopt;
  return *reported - truth;
}

/// Bias within half a unit of the second decimal shows as 0.00.
inline bool is_exact_match(double bias) { return std::abs(bias) < 0.005; }

struct PairOutcome {
  std::string case_id;
  std::string provider_id;
  std::string prompt_fingerprint;
  std::string raw_response;
  bool truncated = false;
  std::optional<LlmAssessment> assessment;
  /// Transport, credential or provider failure for this pair.
  std::optional<std::string> error;
  std::optional<ErrorKind> error_kind;
  std::vector<std::string> warnings;
};

struct BiasEntry {
  std::string case_id;
  std::string provider_id;
  std::optional<double> reported_evalue;
  double truth_evalue = 1.0;
  /// False when the case has no published E-value and truth was computed.
  bool truth_from_source = true;
  std::optional<double> bias;
};

struct ConclusionCell {
  std::string case_id;
  std::string provider_id;
  std::optional<ConclusionLabel> label;
};

struct ConfounderCell {
  std::string study_name;
  std::string provider_id;
  std::string source_case_id;
  std::vector<std::string> confounders;
};

struct ProviderSummary {
  std::string provider_id;
  int pairs = 0;
  int evalues_parsed = 0;
  int exact_matches = 0;
  std::optional<double> max_abs_bias;
  std::map<ConclusionLabel, int> label_counts;
  int missing_labels = 0;
  int agreement_compared = 0;
  int agreement_matched = 0;

  friend bool operator==(const ProviderSummary&, const ProviderSummary&) = default;
};

struct EvalReport {
  CaseSet cases;
  std::vector<std::string> providers;
  std::vector<PairOutcome> outcomes;  // case-major, provider-minor
  std::vector<BiasEntry> bias_table;
  std::vector<ConclusionCell> conclusion_matrix;
  std::vector<ConfounderCell> confounder_table;
  std::vector<ProviderSummary> summary;

  [[nodiscard]] const BiasEntry* bias_for(std::string_view case_id, std::string_view provider) const {
    for (const auto& b : bias_table) {
      if (b.case_id == case_id && b.provider_id == provider) return &b;
    }
    return nullptr;
  }

  [[nodiscard]] const ConclusionCell* conclusion_for(std::string_view case_id,
                                                     std::string_view provider) const {
    for (const auto& c : conclusion_matrix) {
      if (c.case_id == case_id && c.provider_id == provider) return &c;
    }
    return nullptr;
  }

  [[nodiscard]] const ConfounderCell* confounders_for(std::string_view study,
                                                      std::string_view provider) const {
    for (const auto& c : confounder_table) {
      if (c.study_name == study && c.provider_id == provider) return &c;
    }
    return nullptr;
  }

  [[nodiscard]] bool has_errors() const {
    return std::any_of(outcomes.begin(), outcomes.end(), [](const PairOutcome& o) { return o.error.has_value(); });
  }
};

/// Per-provider statistics, derived only from the three tables.
inline std::vector<ProviderSummary> summarize(const EvalReport& r) {
  std::vector<ProviderSummary> out;
  for (const auto& p : r.providers) {
    ProviderSummary s;
    s.provider_id = p;
    for (const auto& b : r.bias_table) {
      if (b.provider_id != p) continue;
      ++s.pairs;
      if (!b.bias) continue;
      ++s.evalues_parsed;
      if (is_exact_match(*b.bias)) ++s.exact_matches;
      s.max_abs_bias = std::max(s.max_abs_bias.value_or(0.0), std::abs(*b.bias));
    }
    for (const auto& c : r.conclusion_matrix) {
      if (c.provider_id != p) continue;
      if (!c.label) {
        ++s.missing_labels;
        continue;
      }
      ++s.label_counts[*c.label];
      const auto* sc = r.cases.find(c.case_id);
      if (sc && sc->truth_conclusion) {
        ++s.agreement_compared;
        if (*sc->truth_conclusion == *c.label) ++s.agreement_matched;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Builds the tables from per-pair outcomes. Outcomes must be in
/// case-major, provider-minor order.
inline void assemble_tables(EvalReport& r) {
  r.bias_table.clear();
  r.conclusion_matrix.clear();
  r.confounder_table.clear();
  std::size_t k = 0;
  for (const auto& c : r.cases.cases) {
    const double truth = c.truth_evalue.value_or(evalue_point(c.estimate).evalue);
    for (const auto& p : r.providers) {
      const auto& o = r.outcomes.at(k++);
      std::optional<double> reported;
      std::optional<ConclusionLabel> label;
      if (o.assessment) {
        reported = o.assessment->reported_evalue;
        label = o.assessment->conclusion;
      }
      r.bias_table.push_back({c.case_id, p, reported, truth, c.truth_evalue.has_value(),
                              compute_bias(reported, truth)});
      r.conclusion_matrix.push_back({c.case_id, p, label});
    }
  }
  for (const auto& study : r.cases.studies()) {
    const auto first = std::find_if(r.cases.cases.begin(), r.cases.cases.end(),
                                    [&](const StudyCase& c) { return c.study_name == study; });
    const auto case_index = static_cast<std::size_t>(first - r.cases.cases.begin());
    for (std::size_t pi = 0; pi < r.providers.size(); ++pi) {
      const auto& o = r.outcomes.at(case_index * r.providers.size() + pi);
      ConfounderCell cell{study, r.providers[pi], first->case_id, {}};
      if (o.assessment) cell.confounders = o.assessment->confounders;
      r.confounder_table.push_back(std::move(cell));
    }
  }
  r.summary = summarize(r);
}

/// Runs `job(i)` for i in [0, count) on at most `parallelism` threads.
/// Stops handing out new indices once `cancel` is set.
template <typename Job>
void run_bounded(std::size_t count, std::size_t parallelism, const std::atomic<bool>* cancel, Job job) {
  parallelism = std::max<std::size_t>(1, std::min(parallelism, count));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      if (cancel && cancel->load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      job(i);
    }
  };
  if (parallelism == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(parallelism);
  for (std::size_t t = 0; t < parallelism; ++t) threads.emplace_back(worker);
}

struct PipelineOptions {
  std::size_t parallelism = 4;
  const std::atomic<bool>* cancel = nullptr;
};

inline EvalReport run_pipeline(const CaseSet& cases, const std::vector<ProviderConfig>& providers,
                               const TemplateSet& templates, Gateway& gateway, TransportMode mode,
                               const PipelineOptions& options = {}) {
  if (cases.cases.empty()) throw Error(ErrorKind::ConfigError, "case set is empty");
  if (providers.empty()) throw Error(ErrorKind::ConfigError, "provider list is empty");
  std::vector<std::string> ids;
  for (const auto& p : providers) {
    validate_config(p);
    if (std::find(ids.begin(), ids.end(), p.provider_id) != ids.end()) {
      throw Error(ErrorKind::ConfigError, "duplicate provider_id '" + p.provider_id + "'");
    }
    ids.push_back(p.provider_id);
  }

  std::vector<PromptBundle> bundles;
  bundles.reserve(cases.cases.size());
  for (const auto& c : cases.cases) bundles.push_back(templates.render(c));

  if (mode == TransportMode::Recorded) {
    auto missing = gateway.missing_transcripts(providers, bundles);
    if (!missing.empty()) {
      const std::string message =
          std::to_string(missing.size()) + " transcript(s) missing, first: " + missing.front();
      throw Error(ErrorKind::MissingTranscript, message, std::move(missing));
    }
  }

  EvalReport report;
  report.cases = cases;
  report.providers = ids;
  const std::size_t n = cases.cases.size() * providers.size();
  report.outcomes.resize(n);

  run_bounded(n, options.parallelism, options.cancel, [&](std::size_t i) {
    const auto& c = cases.cases[i / providers.size()];
    const auto& p = providers[i % providers.size()];
    const auto& bundle = bundles[i / providers.size()];
    PairOutcome o;
    o.case_id = c.case_id;
    o.provider_id = p.provider_id;
    o.prompt_fingerprint = bundle.fingerprint;
    try {
      const auto response = gateway.send_chat(p, bundle, mode);
      o.raw_response = response.text;
      o.truncated = response.truncated;
      if (response.truncated) o.warnings.push_back("response hit the token limit");
      o.assessment = parse_assessment(response.text);
      o.warnings.insert(o.warnings.end(), o.assessment->warnings.begin(), o.assessment->warnings.end());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::EmptyResponse) {
        o.warnings.push_back("empty response");
      } else {
        o.error = e.what();
        o.error_kind = e.kind();
      }
    }
    report.outcomes[i] = std::move(o);
  });

  for (std::size_t i = 0; i < n; ++i) {
    auto& o = report.outcomes[i];
    if (o.case_id.empty()) {  // never started (cancelled)
      o.case_id = cases.cases[i / providers.size()].case_id;
      o.provider_id = providers[i % providers.size()].provider_id;
      o.error = "cancelled";
      o.error_kind = ErrorKind::TransportError;
    }
  }
  assemble_tables(report);
  return report;
}

}  // namespace evsens

namespace evsens {

inline nlohmann::ordered_json to_json(const PairOutcome& o) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  j["case_id"] = o.case_id;
  j["provider_id"] = o.provider_id;
  j["prompt_fingerprint"] = o.prompt_fingerprint;
  j["raw_response"] = o.raw_response;
  j["truncated"] = o.truncated;
  j["assessment"] = o.assessment ? to_json(*o.assessment) : ojson(nullptr);
  j["error"] = o.error ? ojson(*o.error) : ojson(nullptr);
  j["error_kind"] = o.error_kind ? ojson(std::string(to_string(*o.error_kind))) : ojson(nullptr);
  j["warnings"] = o.warnings;
  return j;
}

inline PairOutcome outcome_from_json(const nlohmann::json& j) {
  PairOutcome o;
  o.case_id = j.at("case_id").get<std::string>();
  o.provider_id = j.at("provider_id").get<std::string>();
  o.prompt_fingerprint = j.at("prompt_fingerprint").get<std::string>();
  o.raw_response = j.at("raw_response").get<std::string>();
  o.truncated = j.at("truncated").get<bool>();
  if (!j.at("assessment").is_null()) o.assessment = assessment_from_json(j.at("assessment"));
  if (!j.at("error").is_null()) o.error = j.at("error").get<std::string>();
  if (!j.at("error_kind").is_null()) o.error_kind = parse_error_kind(j.at("error_kind").get<std::string>());
  o.warnings = j.at("warnings").get<std::vector<std::string>>();
  return o;
}

}  // namespace evsens
