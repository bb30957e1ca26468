#include <gtest/gtest.h>

#include "evsens/study.hpp"
#include "test_util.hpp"

using namespace evsens;

namespace {

StudyCase ever_smoking() {
  StudyCase c;
  c.case_id = "smoking-ever";
  c.study_name = "Smoking study";
  c.exposure = "Ever smoking";
  c.outcome = "Pulmonary fibrosis";
  c.measured_confounders = {"age", "sex"};
  c.estimate = {EffectMeasure::HazardRatio, 2.132, "HR"};
  c.truth_evalue = 3.686;
  c.truth_conclusion = ConclusionLabel::Unlikely;
  return c;
}

std::string one_case_doc(const std::string& case_fields) {
  return R"({"version": "1", "cases": [{"case_id": "a", "study_name": "S", "exposure": "E", "outcome": "O",
            "measured_confounders": [], "estimate": {"measure": "rr", "value": 1.5})" +
         case_fields + "}]}";
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::IoError;
}

}  // namespace

TEST(StudyRegistry, BundledPaperCases) {
  const auto set = load_cases(testutil::bundled().paper_cases());
  ASSERT_EQ(set.cases.size(), 11u);
  EXPECT_EQ(set.studies().size(), 4u);
  for (const auto& c : set.cases) {
    ASSERT_TRUE(c.truth_evalue) << c.case_id;
    EXPECT_NEAR(evalue_point(c.estimate).evalue, *c.truth_evalue, 0.005) << c.case_id;
  }
  // Only the smoking study states a conclusion usable as truth here.
  for (const auto& c : set.cases) {
    EXPECT_EQ(c.truth_conclusion.has_value(), c.study_name == "Smoking study") << c.case_id;
  }
}

TEST(StudyRegistry, ValidCaseHasNoViolations) { EXPECT_TRUE(validate_case(ever_smoking()).empty()); }

TEST(StudyRegistry, TruthBelowOneIsOneViolation) {
  auto c = ever_smoking();
  c.truth_evalue = 0.5;
  const auto v = validate_case(c);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].field, "truth_evalue");
  EXPECT_EQ(v[0].rule, "truth_evalue ≥ 1");
  EXPECT_EQ(v[0].case_id, "smoking-ever");
}

TEST(StudyRegistry, DuplicateIdIsSetLevelViolation) {
  CaseSet set;
  set.cases = {ever_smoking(), ever_smoking()};
  const auto v = validate_set(set);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v[0].case_id.empty());
  EXPECT_NE(v[0].rule.find("duplicate"), std::string::npos);
}

TEST(StudyRegistry, EmptyCaseListIsValidationError) {
  EXPECT_EQ(kind_of([] { parse_cases(R"({"version": "1", "cases": []})"); }), ErrorKind::ValidationError);
}

TEST(StudyRegistry, NegativeEffectNamesTheCase) {
  auto doc = one_case_doc("");
  doc.replace(doc.find("1.5"), 3, "-1");
  try {
    parse_cases(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("estimate.value"), std::string::npos);
  }
}

TEST(StudyRegistry, UnknownFieldRejected) {
  try {
    parse_cases(one_case_doc(R"(, "colour": "blue")"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
}

TEST(StudyRegistry, MalformedJsonReportsLine) {
  try {
    parse_cases("{\n  \"version\": \"1\",\n  \"cases\": [\n  oops\n]}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(StudyRegistry, WrongTypesAndValues) {
  EXPECT_EQ(kind_of([] { parse_cases(one_case_doc(R"(, "truth_conclusion": "maybe")")); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { parse_cases(R"({"version": "2", "cases": []})"); }), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of([] { parse_cases(R"({"cases": []})"); }), ErrorKind::ParseError);
  auto doc = one_case_doc("");
  doc.replace(doc.find("\"rr\""), 4, "\"md\"");
  EXPECT_EQ(kind_of([&] { parse_cases(doc); }), ErrorKind::ParseError);
}

TEST(StudyRegistry, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { load_cases("/nonexistent/cases.json"); }), ErrorKind::IoError);
}

TEST(StudyRegistry, SaveLoadRoundTrip) {
  testutil::TempDir dir;
  const auto original = load_cases(testutil::bundled().paper_cases());
  save_cases(original, dir / "cases.json");
  const auto reloaded = load_cases(dir / "cases.json");
  EXPECT_EQ(reloaded, original);
  EXPECT_EQ(dump_cases(reloaded), dump_cases(original));

  CaseSet small;
  small.cases = {ever_smoking()};
  small.cases[0].measured_confounders.clear();
  small.cases[0].truth_conclusion.reset();
  save_cases(small, dir / "small.json");
  EXPECT_EQ(load_cases(dir / "small.json"), small);
}

TEST(StudyRegistry, BundledFileIsCanonicalDump) {
  const auto path = testutil::bundled().paper_cases();
  EXPECT_EQ(dump_cases(load_cases(path)), read_text_file(path));
}

TEST(StudyRegistry, LabelKeys) {
  for (auto l : {ConclusionLabel::Unlikely, ConclusionLabel::Possibly, ConclusionLabel::HighlyLikely}) {
    EXPECT_EQ(parse_label_key(to_key(l)), l);
  }
  EXPECT_EQ(to_display(ConclusionLabel::HighlyLikely), "Highly likely");
  EXPECT_FALSE(parse_label_key("Highly likely"));
}
