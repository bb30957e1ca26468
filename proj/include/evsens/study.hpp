#pragma once

// Study cases and case-set documents.
//
// A case set is a single JSON document:
//
//   {
//     "version": "1",
//     "cases": [
//       {
//         "case_id": "smoking-ever",
//         "study_name": "Smoking study",
//         "exposure": "Ever smoking",
//         "outcome": "Idiopathic pulmonary fibrosis",
//         "measured_confounders": ["..."],
//         "confounders_abbreviated": true,        // optional
//         "estimate": {"measure": "hr", "value": 2.132, "label": "..."},
//         "truth_evalue": 3.686,                  // optional
//         "truth_conclusion": "unlikely",         // optional
//         "notes": "..."                          // optional
//       }
//     ]
//   }
//
// Unknown fields are rejected.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsens/error.hpp"
#include "evsens/sensitivity.hpp"

namespace evsens {

inline constexpr std::string_view kCaseSetVersion = "1";

enum class ConclusionLabel { Unlikely, Possibly, HighlyLikely };

/// Stable machine name used in JSON and CSV.
constexpr std::string_view to_key(ConclusionLabel label) noexcept {
  switch (label) {
    case ConclusionLabel::Unlikely: return "unlikely";
    case ConclusionLabel::Possibly: return "possibly";
    case ConclusionLabel::HighlyLikely: return "highly_likely";
  }
  return "unlikely";
}

/// Human-facing name, as used in the conclusion tables.
constexpr std::string_view to_display(ConclusionLabel label) noexcept {
  switch (label) {
    case ConclusionLabel::Unlikely: return "Unlikely";
    case ConclusionLabel::Possibly: return "Possibly";
    case ConclusionLabel::HighlyLikely: return "Highly likely";
  }
  return "Unlikely";
}

inline std::optional<ConclusionLabel> parse_label_key(std::string_view text) {
  if (text == "unlikely") return ConclusionLabel::Unlikely;
  if (text == "possibly") return ConclusionLabel::Possibly;
  if (text == "highly_likely") return ConclusionLabel::HighlyLikely;
  return std::nullopt;
}

struct StudyCase {
  std::string case_id;
  std::string study_name;
  std::string exposure;
  std::string outcome;
  std::vector<std::string> measured_confounders;
  bool confounders_abbreviated = false;
  EffectEstimate estimate;
  std::optional<double> truth_evalue;
  std::optional<ConclusionLabel> truth_conclusion;
  std::string notes;

  friend bool operator==(const StudyCase&, const StudyCase&) = default;
};

struct CaseSet {
  std::string version{kCaseSetVersion};
  std::vector<StudyCase> cases;

  [[nodiscard]] const StudyCase* find(std::string_view case_id) const {
    auto it = std::find_if(cases.begin(), cases.end(),
                           [&](const StudyCase& c) { return c.case_id == case_id; });
    return it == cases.end() ? nullptr : &*it;
  }

  /// Distinct study names in first-appearance order.
  [[nodiscard]] std::vector<std::string> studies() const {
    std::vector<std::string> out;
    for (const auto& c : cases) {
      if (std::find(out.begin(), out.end(), c.study_name) == out.end()) {
        out.push_back(c.study_name);
      }
    }
    return out;
  }

  friend bool operator==(const CaseSet&, const CaseSet&) = default;
};

struct Violation {
  std::string case_id;  // empty for set-level violations
  std::string field;
  std::string rule;

  [[nodiscard]] std::string to_string() const {
    std::string out = case_id.empty() ? "case set" : "case '" + case_id + "'";
    return out + ": " + field + " (" + rule + ")";
  }

  friend bool operator==(const Violation&, const Violation&) = default;
};

inline std::vector<Violation> validate_case(const StudyCase& c) {
  std::vector<Violation> out;
  auto add = [&](std::string field, std::string rule) {
    out.push_back({c.case_id, std::move(field), std::move(rule)});
  };
  if (c.case_id.empty()) add("case_id", "case_id must be non-empty");
  if (c.study_name.empty()) add("study_name", "study_name must be non-empty");
  if (c.exposure.empty()) add("exposure", "exposure must be non-empty");
  if (c.outcome.empty()) add("outcome", "outcome must be non-empty");
  for (const auto& m : c.measured_confounders) {
    if (m.empty()) {
      add("measured_confounders", "entries must be non-empty");
      break;
    }
  }
  if (!std::isfinite(c.estimate.value)) {
    add("estimate.value", "estimate.value must be finite");
  } else if (c.estimate.value <= 0.0) {
    add("estimate.value", "estimate.value > 0");
  }
  if (c.truth_evalue) {
    if (!std::isfinite(*c.truth_evalue) || *c.truth_evalue < 1.0) {
      add("truth_evalue", "truth_evalue ≥ 1");
    }
  }
  return out;
}

/// Case-level violations for every case plus set-level ones (empty set,
/// duplicate ids).
inline std::vector<Violation> validate_set(const CaseSet& set) {
  std::vector<Violation> out;
  if (set.version != kCaseSetVersion) {
    out.push_back({"", "version", "unsupported schema version '" + set.version + "'"});
  }
  if (set.cases.empty()) out.push_back({"", "cases", "case set must be non-empty"});
  std::set<std::string> seen;
  for (const auto& c : set.cases) {
    auto v = validate_case(c);
    out.insert(out.end(), v.begin(), v.end());
    if (!c.case_id.empty() && !seen.insert(c.case_id).second) {
      out.push_back({"", "case_id", "duplicate case_id '" + c.case_id + "'"});
    }
  }
  return out;
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline void reject_unknown(const nlohmann::json& obj,
                           std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorKind::ParseError, where + ": unknown field '" + key + "'");
    }
  }
}

template <typename T>
T require_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::ParseError, where + ": missing field '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::ParseError, where + ": field '" + key + "' has the wrong type");
  }
}

inline std::string line_context(const std::string& text, std::size_t byte) {
  const std::size_t upto = std::min(byte, text.size());
  const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
  return "line " + std::to_string(line);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const StudyCase& c) {
  detail::ojson j;
  j["case_id"] = c.case_id;
  j["study_name"] = c.study_name;
  j["exposure"] = c.exposure;
  j["outcome"] = c.outcome;
  j["measured_confounders"] = c.measured_confounders;
  if (c.confounders_abbreviated) j["confounders_abbreviated"] = true;
  j["estimate"] = {{"measure", std::string(to_short_string(c.estimate.measure))},
                   {"value", c.estimate.value},
                   {"label", c.estimate.label}};
  if (c.truth_evalue) j["truth_evalue"] = *c.truth_evalue;
  if (c.truth_conclusion) j["truth_conclusion"] = std::string(to_key(*c.truth_conclusion));
  if (!c.notes.empty()) j["notes"] = c.notes;
  return j;
}

inline nlohmann::ordered_json to_json(const CaseSet& set) {
  detail::ojson j;
  j["version"] = set.version;
  j["cases"] = detail::ojson::array();
  for (const auto& c : set.cases) j["cases"].push_back(to_json(c));
  return j;
}

inline StudyCase case_from_json(const nlohmann::json& j, std::size_t index) {
  const std::string where = "cases[" + std::to_string(index) + "]";
  if (!j.is_object()) throw Error(ErrorKind::ParseError, where + ": expected an object");
  detail::reject_unknown(j,
                         {"case_id", "study_name", "exposure", "outcome",
                          "measured_confounders", "confounders_abbreviated",
                          "estimate", "truth_evalue", "truth_conclusion", "notes"},
                         where);
  StudyCase c;
  c.case_id = detail::require_field<std::string>(j, "case_id", where);
  const std::string named = where + " ('" + c.case_id + "')";
  c.study_name = detail::require_field<std::string>(j, "study_name", named);
  c.exposure = detail::require_field<std::string>(j, "exposure", named);
  c.outcome = detail::require_field<std::string>(j, "outcome", named);
  c.measured_confounders =
      detail::require_field<std::vector<std::string>>(j, "measured_confounders", named);
  if (j.contains("confounders_abbreviated")) {
    c.confounders_abbreviated =
        detail::require_field<bool>(j, "confounders_abbreviated", named);
  }

  const auto& est = j.find("estimate");
  if (est == j.end() || !est->is_object()) {
    throw Error(ErrorKind::ParseError, named + ": missing object 'estimate'");
  }
  detail::reject_unknown(*est, {"measure", "value", "label"}, named + ".estimate");
  const auto measure_text = detail::require_field<std::string>(*est, "measure", named + ".estimate");
  const auto measure = parse_measure(measure_text);
  if (!measure) {
    throw Error(ErrorKind::ParseError,
                named + ".estimate: unknown measure '" + measure_text + "' (rr|or|hr)");
  }
  c.estimate.measure = *measure;
  c.estimate.value = detail::require_field<double>(*est, "value", named + ".estimate");
  if (est->contains("label")) {
    c.estimate.label = detail::require_field<std::string>(*est, "label", named + ".estimate");
  }

  if (j.contains("truth_evalue") && !j["truth_evalue"].is_null()) {
    c.truth_evalue = detail::require_field<double>(j, "truth_evalue", named);
  }
  if (j.contains("truth_conclusion") && !j["truth_conclusion"].is_null()) {
    const auto text = detail::require_field<std::string>(j, "truth_conclusion", named);
    c.truth_conclusion = parse_label_key(text);
    if (!c.truth_conclusion) {
      throw Error(ErrorKind::ParseError,
                  named + ": unknown truth_conclusion '" + text +
                      "' (unlikely|possibly|highly_likely)");
    }
  }
  if (j.contains("notes")) c.notes = detail::require_field<std::string>(j, "notes", named);
  return c;
}

/// Parses and validates a case-set document held in memory.
inline CaseSet parse_cases(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError,
                "malformed JSON at " + detail::line_context(text, e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "top level must be an object");
  detail::reject_unknown(doc, {"version", "cases"}, "case set");

  CaseSet set;
  set.version = detail::require_field<std::string>(doc, "version", "case set");
  const auto cases = doc.find("cases");
  if (cases == doc.end() || !cases->is_array()) {
    throw Error(ErrorKind::ParseError, "case set: missing array 'cases'");
  }
  for (std::size_t i = 0; i < cases->size(); ++i) {
    set.cases.push_back(case_from_json((*cases)[i], i));
  }

  const auto violations = validate_set(set);
  if (!violations.empty()) {
    std::vector<std::string> details;
    for (const auto& v : violations) details.push_back(v.to_string());
    throw Error(ErrorKind::ValidationError, details.front(), details);
  }
  return set;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

inline CaseSet load_cases(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_cases(text);
  } catch (const Error& e) {
    std::vector<std::string> details = e.details();
    throw Error(e.kind(), path.string() + ": " + e.message(), std::move(details));
  }
}

inline std::string dump_cases(const CaseSet& set) { return to_json(set).dump(2) + "\n"; }

inline void save_cases(const CaseSet& set, const std::filesystem::path& path) {
  write_text_file(path, dump_cases(set));
}

}  // namespace evsens
