#pragma once

// Builds replay transcripts for the bundled paper case set from the compact
// description in data/fixtures/paper_llm_outputs.json.

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsens/gateway.hpp"
#include "evsens/prompt.hpp"
#include "evsens/study.hpp"
#include "evsens/synthetic.hpp"

namespace evsens::fixtures {

struct FixtureResponse {
  std::string case_id;
  std::string provider_id;
  std::string evalue_text;
  ConclusionLabel label = ConclusionLabel::Possibly;
  bool hedge = false;
};

struct PaperOutputs {
  std::string captured_at;
  std::map<std::string, AnswerStyle> styles;
  std::vector<FixtureResponse> responses;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> confounders;  // (study, provider)
};

inline PaperOutputs load_paper_outputs(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  PaperOutputs out;
  out.captured_at = j.at("captured_at").get<std::string>();
  for (const auto& [provider, style] : j.at("styles").items()) {
    const auto s = parse_answer_style(style.get<std::string>());
    if (!s) throw Error(ErrorKind::ParseError, "unknown answer style for " + provider);
    out.styles[provider] = *s;
  }
  for (const auto& r : j.at("responses")) {
    FixtureResponse f;
    f.case_id = r.at("case_id").get<std::string>();
    f.provider_id = r.at("provider_id").get<std::string>();
    f.evalue_text = r.at("evalue").get<std::string>();
    const auto label = parse_label_key(r.at("conclusion").get<std::string>());
    if (!label) throw Error(ErrorKind::ParseError, "bad conclusion in fixture for " + f.case_id);
    f.label = *label;
    f.hedge = r.value("hedge", false);
    out.responses.push_back(std::move(f));
  }
  for (const auto& c : j.at("confounders")) {
    out.confounders[{c.at("study_name").get<std::string>(), c.at("provider_id").get<std::string>()}] =
        c.at("items").get<std::vector<std::string>>();
  }
  return out;
}

inline std::vector<Transcript> build_paper_transcripts(const CaseSet& cases,
                                                       const std::vector<ProviderConfig>& providers,
                                                       const TemplateSet& templates,
                                                       const PaperOutputs& outputs) {
  std::vector<Transcript> out;
  for (const auto& r : outputs.responses) {
    const auto* c = cases.find(r.case_id);
    if (!c) throw Error(ErrorKind::ValidationError, "fixture references unknown case " + r.case_id);
    const auto config = std::find_if(providers.begin(), providers.end(),
                                     [&](const ProviderConfig& p) { return p.provider_id == r.provider_id; });
    if (config == providers.end()) {
      throw Error(ErrorKind::ConfigError, "fixture references unknown provider " + r.provider_id);
    }
    AnswerContent content;
    content.evalue_text = r.evalue_text;
    content.label = r.label;
    content.hedge = r.hedge;
    content.confounders = outputs.confounders.at({c->study_name, r.provider_id});

    const auto bundle = templates.render(*c);
    Transcript t;
    t.key = transcript_key(*config, bundle.fingerprint);
    t.provider_id = config->provider_id;
    t.model_id = config->model_id;
    t.case_id = c->case_id;
    t.request_snapshot = adapt_request(*config, bundle);
    t.response_text = compose_answer(*c, content, outputs.styles.at(r.provider_id));
    t.captured_at = outputs.captured_at;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace evsens::fixtures
