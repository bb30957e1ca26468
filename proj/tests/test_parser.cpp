#include <random>

#include <gtest/gtest.h>

#include "evsens/parser.hpp"
#include "evsens/synthetic.hpp"

using namespace evsens;

namespace {

bool has_warning(const LlmAssessment& a, std::string_view needle) {
  for (const auto& w : a.warnings) {
    if (w.find(needle) != std::string::npos) return true;
  }
  return false;
}

const char* const kEverSmokingAnswer = R"(1. Calculate the E-value
The hazard ratio is 2.132, so E-value = 2.132 + sqrt(2.132 × 1.132) = 3.686.

2. Cornfield inequality perspective
A single confounder would need HR >= 2.132 with both smoking and fibrosis.

3. E-value perspective
An E-value of 3.686 is large relative to known risk factors.

4. Conclusion
Taking both views together, unmeasured confounding is unlikely to explain away the association.

5. Potential unmeasured confounders
1. Occupational exposures
2. Genetic predisposition
3. Sleep quality
)";

}  // namespace

TEST(ParseEvalue, SpecExamples) {
  EXPECT_EQ(parse_evalue("E = 2.41 + sqrt(2.41·1.41) = 4.25. The E-value is 4.25."), 4.25);
  EXPECT_FALSE(parse_evalue("cannot compute"));
  EXPECT_EQ(parse_evalue("E-value = 3.916"), 3.916);
}

TEST(ParseEvalue, AcceptedForms) {
  EXPECT_EQ(parse_evalue("E-value: 1.74"), 1.74);
  EXPECT_EQ(parse_evalue("The E-value is 1.32."), 1.32);
  EXPECT_EQ(parse_evalue("**E-value ≈ 2.017**"), 2.017);
  EXPECT_EQ(parse_evalue("E value = 6.66"), 6.66);
  EXPECT_EQ(parse_evalue("Evalue=1.83"), 1.83);
}

TEST(ParseEvalue, FinalStatedValueWins) {
  EXPECT_EQ(parse_evalue("Step one gives an E-value of 3.9.\nAfter correcting, the E-value is 3.686."), 3.686);
  EXPECT_EQ(parse_evalue("E-value = 1.063 + sqrt(1.063 × 0.063) = 1.321"), 1.321);
}

TEST(ParseEvalue, IgnoresNumbersWithoutEvalueMention) {
  EXPECT_FALSE(parse_evalue("The risk ratio was 2.41 and the CI was wide."));
  EXPECT_FALSE(parse_evalue("no numeric content at all"));
}

TEST(ParseEvalue, RangesAndGroupedNumbersAreRejected) {
  auto r = parse_detail::parse_evalue_detailed("The E-value is 1.3–1.4.");
  EXPECT_FALSE(r.value);
  EXPECT_TRUE(r.warning);
  EXPECT_FALSE(parse_evalue("E-value: 1.3-1.4"));
  EXPECT_FALSE(parse_evalue("E-value between 1.3 to 1.4"));
  EXPECT_FALSE(parse_evalue("E-value = 1,234.5"));
}

TEST(ParseEvalue, NegativeDifferenceIsNotARange) {
  EXPECT_EQ(parse_evalue("E-value = 1.341 + sqrt(1.341 × (1.341 - 1)) = 2.017"), 2.017);
}

TEST(ParseConclusion, SpecExamples) {
  EXPECT_EQ(parse_conclusion("...we conclude unmeasured confounding is highly likely to explain away..."),
            ConclusionLabel::HighlyLikely);
  EXPECT_EQ(parse_conclusion("Possibly. Unlikely in general, but after weighing both, we conclude: possibly."),
            ConclusionLabel::Possibly);
  const auto none = parse_detail::parse_conclusion_detailed("The association seems robust.");
  EXPECT_FALSE(none.label);
  EXPECT_TRUE(none.warning);
}

TEST(ParseConclusion, SubstringSafety) {
  EXPECT_EQ(parse_conclusion("Highly likely."), ConclusionLabel::HighlyLikely);
  EXPECT_EQ(parse_conclusion("It is HIGHLY   LIKELY that confounding explains this"), ConclusionLabel::HighlyLikely);
  EXPECT_EQ(parse_conclusion("Unlikely"), ConclusionLabel::Unlikely);
  EXPECT_FALSE(parse_conclusion("it is likely"));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto text = random_highly_likely_text(rng);
    EXPECT_EQ(parse_conclusion(text), ConclusionLabel::HighlyLikely) << text;
  }
}

TEST(ParseConclusion, EchoedPromptIsIgnored) {
  EXPECT_EQ(parse_conclusion(R"(Conclude whether confounding is "unlikely", "possibly", or "highly likely".
Conclusion: possibly.)"),
            ConclusionLabel::Possibly);
}

TEST(ParseConclusion, UnanchoredDisagreementIsAbsent) {
  const auto r = parse_detail::parse_conclusion_detailed("Unlikely for some, possibly for others.");
  EXPECT_FALSE(r.label);
  EXPECT_TRUE(r.warning);
}

TEST(ParseConfounders, NumberedList) {
  EXPECT_EQ(parse_confounders("1. Occupational exposures\n2. Genetic predisposition\n3. Sleep quality"),
            (std::vector<std::string>{"Occupational exposures", "Genetic predisposition", "Sleep quality"}));
}

TEST(ParseConfounders, MarkdownVariants) {
  EXPECT_EQ(parse_confounders("- **Dietary habits**: fish intake\n- **Sleep** – poor sleep\n* Stress levels."),
            (std::vector<std::string>{"Dietary habits", "Sleep", "Stress levels"}));
  EXPECT_EQ(parse_confounders("1) **Socioeconomic status:** access\n   - sub bullet\n2) Comorbidities"),
            (std::vector<std::string>{"Socioeconomic status", "Comorbidities"}));
}

TEST(ParseConfounders, DedupesCapsAndWarns) {
  auto r = parse_detail::parse_confounders_detailed("1. Age\n2. age\n3. Sex");
  EXPECT_EQ(r.items, (std::vector<std::string>{"Age", "Sex"}));
  EXPECT_FALSE(r.warnings.empty());
  r = parse_detail::parse_confounders_detailed("1. a\n2. b\n3. c\n4. d\n5. e\n6. f\n7. g");
  EXPECT_EQ(r.items.size(), 5u);
  r = parse_detail::parse_confounders_detailed("Diet; exercise; stress");
  EXPECT_EQ(r.items, (std::vector<std::string>{"Diet", "exercise", "stress"}));
  EXPECT_FALSE(r.warnings.empty());
}

TEST(ParseAssessment, EverSmokingFixtureShape) {
  const auto a = parse_assessment(kEverSmokingAnswer);
  EXPECT_EQ(a.reported_evalue, 3.686);
  EXPECT_EQ(a.conclusion, ConclusionLabel::Unlikely);
  EXPECT_EQ(a.confounders,
            (std::vector<std::string>{"Occupational exposures", "Genetic predisposition", "Sleep quality"}));
  EXPECT_TRUE(a.warnings.empty()) << a.warnings.front();
  EXPECT_NE(a.cornfield_analysis.find("HR >= 2.132"), std::string::npos);
  EXPECT_NE(a.evalue_analysis.find("3.686 is large"), std::string::npos);
}

TEST(ParseAssessment, MarkdownHeadings) {
  const auto a = parse_assessment(
      "## Task 1: E-value\nE-value = 1.92\n## Task 2: Cornfield\nx\n## Task 3: E-value view\ny\n"
      "## Task 4: Conclusion\nPossibly.\n## Task 5: Confounders\n1. Diet\n2. Sleep\n3. Work");
  EXPECT_EQ(a.reported_evalue, 1.92);
  EXPECT_EQ(a.conclusion, ConclusionLabel::Possibly);
  EXPECT_EQ(a.confounders.size(), 3u);
}

TEST(ParseAssessment, NoNumbersGivesAbsentValueWithWarning) {
  const auto a = parse_assessment("I cannot help with this request.");
  EXPECT_FALSE(a.reported_evalue);
  EXPECT_FALSE(a.conclusion);
  EXPECT_TRUE(has_warning(a, "E-value"));
  EXPECT_TRUE(has_warning(a, "no task blocks"));
}

TEST(ParseAssessment, MissingBlocksAreWarnings) {
  const auto a = parse_assessment("1. E-value = 2.0\n2. fine\n3. fine\n");
  EXPECT_EQ(a.reported_evalue, 2.0);
  EXPECT_TRUE(has_warning(a, "4 (conclusion)"));
  EXPECT_TRUE(has_warning(a, "5 (confounders)"));
}

TEST(ParseAssessment, EmptyResponse) {
  for (const char* text : {"", "   \n\t "}) {
    try {
      (void)parse_assessment(text);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::EmptyResponse);
    }
  }
}

TEST(ParseAssessment, TotalOnArbitraryText) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "0123456789.,-–:=*#E-valueconclud highlylikelyunlikelypossibly\n\t ()|•";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(1, 400);
  for (int i = 0; i < 2000; ++i) {
    std::string text;
    const auto n = len(rng);
    for (std::size_t k = 0; k < n; ++k) text.push_back(alphabet[pick(rng)]);
    if (parse_detail::trim(text).empty()) continue;
    EXPECT_NO_THROW({
      const auto a = parse_assessment(text);
      if (a.reported_evalue) {
        EXPECT_GT(*a.reported_evalue, 0.0);
      }
      for (const auto& c : a.confounders) EXPECT_FALSE(c.empty());
    });
  }
}

TEST(ParseAssessment, SyntheticRoundTrip) {
  std::mt19937_64 rng(20251015);
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_sample(rng);
    const auto text = compose_answer(s.study_case, s.content, s.style);
    const auto a = parse_assessment(text);
    double expected = 0;
    ASSERT_TRUE(fmt::parse_double(s.content.evalue_text, expected));
    ASSERT_EQ(a.reported_evalue, expected) << text;
    ASSERT_EQ(a.conclusion, s.content.label) << text;
    ASSERT_EQ(a.confounders, s.content.confounders) << text;
  }
}

TEST(ParseAssessment, JsonRoundTrip) {
  const auto a = parse_assessment(kEverSmokingAnswer);
  EXPECT_EQ(assessment_from_json(nlohmann::json::parse(to_json(a).dump())), a);
  const auto empty = parse_assessment("nothing here");
  EXPECT_EQ(assessment_from_json(nlohmann::json::parse(to_json(empty).dump())), empty);
}
