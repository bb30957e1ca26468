#pragma once

// Composer for five-block answers in several layouts. Used to build the
// replay fixtures and as the generator for parser round-trip properties:
// whatever is injected here must come back out of parse_assessment.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evsens/format.hpp"
#include "evsens/sensitivity.hpp"
#include "evsens/study.hpp"

namespace evsens {

enum class AnswerStyle {
  Plain,             // "1. Calculate the E-value"
  MarkdownHeadings,  // "## 1. E-value Calculation"
  TaskBold,          // "### **Task 1: ...**"
  BoldNumbered,      // "**1. E-value Calculation**"
};

inline std::optional<AnswerStyle> parse_answer_style(std::string_view text) {
  if (text == "plain") return AnswerStyle::Plain;
  if (text == "markdown") return AnswerStyle::MarkdownHeadings;
  if (text == "task-bold") return AnswerStyle::TaskBold;
  if (text == "bold-numbered") return AnswerStyle::BoldNumbered;
  return std::nullopt;
}

struct AnswerContent {
  std::string evalue_text;
  ConclusionLabel label = ConclusionLabel::Possibly;
  std::vector<std::string> confounders;
  /// Mention a different label before the decisive conclusion statement.
  bool hedge = false;
};

namespace synth_detail {

inline std::string label_word(ConclusionLabel l) {
  switch (l) {
    case ConclusionLabel::Unlikely: return "unlikely";
    case ConclusionLabel::Possibly: return "possibly";
    case ConclusionLabel::HighlyLikely: return "highly likely";
  }
  return "possibly";
}

inline ConclusionLabel other_label(ConclusionLabel l) {
  return l == ConclusionLabel::Unlikely ? ConclusionLabel::Possibly : ConclusionLabel::Unlikely;
}

inline std::string lower_first(std::string s) {
  if (!s.empty() && s[0] >= 'A' && s[0] <= 'Z' && !(s.size() > 1 && s[1] >= 'A' && s[1] <= 'Z')) {
    s[0] = static_cast<char>(s[0] - 'A' + 'a');
  }
  return s;
}

inline std::string heading(AnswerStyle style, int n, std::string_view title) {
  const std::string num = std::to_string(n);
  switch (style) {
    case AnswerStyle::Plain: return num + ". " + std::string(title);
    case AnswerStyle::MarkdownHeadings: return "## " + num + ". " + std::string(title);
    case AnswerStyle::TaskBold: return "### **Task " + num + ": " + std::string(title) + "**";
    case AnswerStyle::BoldNumbered: return "**" + num + ". " + std::string(title) + "**";
  }
  return num + ". " + std::string(title);
}

}  // namespace synth_detail

inline std::string compose_answer(const StudyCase& c, const AnswerContent& a, AnswerStyle style) {
  using namespace synth_detail;
  const double rr = effective_ratio(c.estimate.value);
  const std::string rr3 = fmt::fixed(rr, 3);
  const std::string excess = fmt::fixed(rr - 1.0, 3);
  const std::string measure(to_short_string(c.estimate.measure));
  std::string m = measure;
  for (auto& ch : m) ch = static_cast<char>(ch - 'a' + 'A');
  const std::string exposure = lower_first(c.exposure);
  const std::string outcome = lower_first(c.outcome);

  std::string out;
  auto para = [&](const std::string& s) {
    out += s;
    out += "\n\n";
  };

  switch (style) {
    case AnswerStyle::Plain: break;
    case AnswerStyle::MarkdownHeadings:
      para("# Sensitivity Analysis: " + c.exposure + " and " + c.outcome);
      break;
    case AnswerStyle::TaskBold:
      para("Below is a structured sensitivity analysis for the association between " + exposure +
           " and " + outcome + ".");
      break;
    case AnswerStyle::BoldNumbered:
      para("Here is the sensitivity analysis for the provided study.");
      break;
  }

  // 1. calculation
  para(heading(style, 1, style == AnswerStyle::Plain ? "Calculate the E-value" : "E-value Calculation"));
  if (c.estimate.value < 1.0) {
    para("The estimate is protective (" + m + " = " + fmt::shortest(c.estimate.value) +
         " < 1), so we work with its reciprocal: 1/" + fmt::shortest(c.estimate.value) + " = " +
         rr3 + ".");
  } else {
    para("The observed " + m + " is " + fmt::shortest(c.estimate.value) + ".");
  }
  switch (style) {
    case AnswerStyle::Plain:
      para("E-value = " + rr3 + " + sqrt(" + rr3 + " \xC3\x97 " + excess + ") = " + a.evalue_text +
           ".\nThe E-value is " + a.evalue_text + ".");
      break;
    case AnswerStyle::MarkdownHeadings:
      para("Using E = RR + \xE2\x88\x9A(RR \xC3\x97 (RR \xE2\x88\x92 1)):\n\nE = " + rr3 + " + \xE2\x88\x9A(" +
           rr3 + " \xC3\x97 " + excess + ")\n\n**E-value = " + a.evalue_text + "**");
      break;
    case AnswerStyle::TaskBold:
      para("Formula: E = RR + sqrt(RR \xC3\x97 (RR \xE2\x88\x92 1)), with RR = " + rr3 +
           ".\nTherefore, the E-value \xE2\x89\x88 " + a.evalue_text + ".");
      break;
    case AnswerStyle::BoldNumbered:
      para("Applying E = RR + sqrt(RR \xC3\x97 (RR - 1)) with RR = " + rr3 +
           " gives the result below.\nThe resulting E-value is **" + a.evalue_text + "**.");
      break;
  }

  // 2. Cornfield
  para(heading(style, 2, style == AnswerStyle::Plain ? "Cornfield inequality perspective"
                                                     : "Cornfield Inequality Perspective"));
  para("For confounding alone to account for the association, an unmeasured factor would need a risk "
       "ratio of at least " + rr3 + " with " + exposure + " and a comparably strong link to " + outcome +
       ". The adjusted covariates (" +
       (c.measured_confounders.empty() ? std::string("none reported") : c.measured_confounders.front()) +
       ") bear on how plausible such a factor is.");

  // 3. E-value perspective
  para(heading(style, 3, style == AnswerStyle::Plain ? "E-value perspective" : "E-value Perspective"));
  para("An E-value of " + a.evalue_text + " means a confounder would need risk ratios of " +
       a.evalue_text + " with both exposure and outcome, above and beyond the measured covariates.");

  // 4. conclusion
  para(heading(style, 4, "Conclusion"));
  const std::string word = label_word(a.label);
  const std::string hedge =
      a.hedge ? "Looking at the Cornfield threshold in isolation one might say " + label_word(other_label(a.label)) +
                    ". "
              : std::string();
  switch (style) {
    case AnswerStyle::Plain:
      para(hedge + "Considering both perspectives, we conclude that unmeasured confounding is \"" + word +
           "\" to explain away the observed association.\nReason: the E-value and the Cornfield threshold "
           "were weighed against the measured covariates and the strength of known risk factors.");
      break;
    case AnswerStyle::MarkdownHeadings:
      para("**Conclusion: " + std::string(to_display(a.label)) + "**\n\n" + hedge +
           "Both the Cornfield threshold of " + rr3 + " and the E-value of " + a.evalue_text +
           " inform this judgement.");
      break;
    case AnswerStyle::TaskBold:
      para(hedge + "Synthesizing the two perspectives, we conclude: **" + word +
           "**. The required confounder strength was compared with known risk factors for " + outcome + ".");
      break;
    case AnswerStyle::BoldNumbered:
      para(hedge + "Final conclusion: **" + std::string(to_display(a.label)) +
           "**.\n\nThe magnitude of the E-value was considered together with the Cornfield requirement.");
      break;
  }

  // 5. confounders
  para(heading(style, 5, style == AnswerStyle::Plain ? "Potential unmeasured confounders"
                                                     : "Potential Unmeasured Confounders"));
  std::string list;
  for (std::size_t i = 0; i < a.confounders.size(); ++i) {
    const std::string& item = a.confounders[i];
    const std::string why = "May influence both " + exposure + " and " + outcome + ".";
    switch (style) {
      case AnswerStyle::Plain: list += std::to_string(i + 1) + ". " + item + "\n"; break;
      case AnswerStyle::MarkdownHeadings:
        list += std::to_string(i + 1) + ". **" + item + "**: " + why + "\n";
        break;
      case AnswerStyle::TaskBold:
        list += "- **" + item + "** \xE2\x80\x93 " + why + "\n";
        break;
      case AnswerStyle::BoldNumbered:
        list += "* **" + item + ":** " + why + "\n   * Often unrecorded in registry data.\n";
        break;
    }
  }
  out += list;
  return out;
}

}  // namespace evsens

#include <random>

namespace evsens {

/// One randomly generated (case, injected answer, layout) triple.
struct SyntheticSample {
  StudyCase study_case;
  AnswerContent content;
  AnswerStyle style = AnswerStyle::Plain;
};

/// Draws a random case and answer. Vocabulary avoids the three label
/// phrases so the only label text is the injected one (plus the hedge).
inline SyntheticSample random_sample(std::mt19937_64& rng) {
  static const std::vector<std::string> exposures = {
      "Coffee intake", "Night shift work", "Statin use", "Air pollution", "Red meat intake",
      "Physical inactivity", "Residential noise", "Sugary drink intake"};
  static const std::vector<std::string> outcomes = {
      "Type 2 diabetes", "Myocardial infarction", "Depression", "Hip fracture", "Asthma",
      "Colorectal cancer", "Chronic kidney disease"};
  static const std::vector<std::string> confounders = {
      "Socioeconomic status", "Genetic predisposition", "Occupational exposures", "Dietary patterns",
      "Sleep quality and duration", "Alcohol consumption", "Baseline frailty", "Access to healthcare",
      "Psychosocial stress", "Medication adherence", "Family history of disease",
      "Neighbourhood deprivation (income, housing)", "Physical activity level"};
  std::uniform_int_distribution<std::size_t> pick_exp(0, exposures.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_out(0, outcomes.size() - 1);
  std::uniform_real_distribution<double> log_rr(-1.2, 1.5);
  std::uniform_int_distribution<int> pick_label(0, 2);
  std::uniform_int_distribution<int> pick_style(0, 3);
  std::uniform_int_distribution<int> pick_count(1, 5);
  std::uniform_int_distribution<int> pick_decimals(2, 3);
  std::bernoulli_distribution coin(0.3);

  SyntheticSample s;
  auto& c = s.study_case;
  c.case_id = "synthetic";
  c.study_name = "Synthetic study";
  c.exposure = exposures[pick_exp(rng)];
  c.outcome = outcomes[pick_out(rng)];
  c.measured_confounders = {"age", "sex"};
  double value = 1.0;
  fmt::parse_double(fmt::fixed(std::exp(log_rr(rng)), 3), value);
  if (value == 1.0) value = 1.001;
  c.estimate.value = value;
  c.estimate.measure = static_cast<EffectMeasure>(pick_label(rng));

  // Reported value: true E-value plus a random error, as the model wrote it.
  std::uniform_real_distribution<double> err(-0.3, 0.3);
  const double reported = std::max(1.0, evalue_point(c.estimate).evalue + err(rng));
  s.content.evalue_text = fmt::fixed(reported, pick_decimals(rng));
  s.content.label = static_cast<ConclusionLabel>(pick_label(rng));
  s.content.hedge = coin(rng);
  std::vector<std::string> pool = confounders;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(pick_count(rng)));
  s.content.confounders = pool;
  s.style = static_cast<AnswerStyle>(pick_style(rng));
  return s;
}

/// Free text whose only label phrase is "highly likely", in varying case,
/// spacing and markup.
inline std::string random_highly_likely_text(std::mt19937_64& rng) {
  static const std::vector<std::string> filler = {
      "the", "association", "confounding", "strength", "cohort", "exposure", "outcome", "evidence",
      "we", "conclude", "that", "is", "given", "weak", "moderate", "estimate", "likelihood",
      "likely-looking", "highlyrated", "conclusion:", "this", "bias", "ratio", "(a)", "**", "\n"};
  static const std::vector<std::string> forms = {
      "highly likely", "Highly likely", "HIGHLY LIKELY", "highly  likely", "**highly likely**",
      "\"highly likely\"", "highly\nlikely", "Highly Likely."};
  std::uniform_int_distribution<std::size_t> f(0, filler.size() - 1);
  std::uniform_int_distribution<std::size_t> g(0, forms.size() - 1);
  std::uniform_int_distribution<int> len(0, 30);
  std::uniform_int_distribution<int> reps(1, 3);
  std::string out;
  const int n = reps(rng);
  for (int r = 0; r < n; ++r) {
    for (int i = len(rng); i > 0; --i) out += filler[f(rng)] + " ";
    out += forms[g(rng)] + " ";
  }
  for (int i = len(rng); i > 0; --i) out += filler[f(rng)] + " ";
  return out;
}

}  // namespace evsens
