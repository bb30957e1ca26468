#include <atomic>
#include <sstream>

#include <gtest/gtest.h>

#include "evsens/cli.hpp"
#include "test_util.hpp"

using namespace evsens;

namespace {

/// Counts construction attempts; any network use in a replay path is a bug.
struct NetworkProbe {
  std::shared_ptr<std::atomic<int>> attempts = std::make_shared<std::atomic<int>>(0);

  CliContext context() const {
    CliContext ctx;
    ctx.http = [a = attempts] { return std::make_shared<NoNetworkClient>(*a); };
    ctx.env = [](const std::string&) { return std::optional<std::string>(); };
    ctx.retry = {0, std::chrono::milliseconds(1)};
    return ctx;
  }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args, const CliContext& ctx) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err, ctx);
  return {code, out.str(), err.str()};
}

Result run(const std::vector<std::string>& args) {
  NetworkProbe probe;
  auto r = run(args, probe.context());
  EXPECT_EQ(probe.attempts->load(), 0) << "network touched by: " << args.front();
  return r;
}

}  // namespace

TEST(CliEvalue, PrintsThreeDecimals) {
  auto r = run({"evalue", "--value", "2.41"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("E-value: 4.253\n"), std::string::npos);
  EXPECT_NE(r.out.find("Band: High"), std::string::npos);
  EXPECT_NE(run({"evalue", "--value", "1.0"}).out.find("E-value: 1.000\n"), std::string::npos);
  r = run({"evalue", "--value", "0.82", "--measure", "hr"});
  EXPECT_NE(r.out.find("E-value: 1.737\n"), std::string::npos);
  EXPECT_NE(r.out.find("Effective ratio: 1.220"), std::string::npos);
}

TEST(CliEvalue, JsonRoundTrip) {
  const auto r = run({"evalue", "--value", "2.132", "--json"});
  ASSERT_EQ(r.code, 0);
  const auto parsed = sensitivity_from_json(nlohmann::json::parse(r.out));
  const auto direct = evalue_point({EffectMeasure::RiskRatio, 2.132, {}});
  EXPECT_EQ(parsed.evalue, direct.evalue);
  EXPECT_EQ(parsed.band, direct.band);
}

TEST(CliEvalue, InvalidInputIsExitOne) {
  EXPECT_EQ(run({"evalue", "--value", "0"}).code, 1);
  const auto neg = run({"evalue", "--value=-1"});
  EXPECT_EQ(neg.code, 1);
  EXPECT_NE(neg.err.find("NonPositiveEffect"), std::string::npos);
  EXPECT_EQ(run({"evalue", "--value", "abc"}).code, 1);
  EXPECT_EQ(run({"evalue", "--value", "2", "--measure", "md"}).code, 1);
  EXPECT_EQ(run({"evalue"}).code, 1);
}

TEST(CliGeneral, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(CliCornfield, BiasFactorAndRequiredStrength) {
  auto r = run({"cornfield", "--rr-eu", "2", "--rr-ud", "2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Bias factor: 1.333"), std::string::npos);
  EXPECT_NE(r.out.find("Grid maximum: 1.333 at p1=1.000, p0=0.500"), std::string::npos);
  r = run({"cornfield", "--value", "0.8", "--json"});
  ASSERT_EQ(r.code, 0);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(r.out)["required_strength"].get<double>(), 1.25);
  r = run({"cornfield", "--rr-eu", "3", "--rr-ud", "5", "--json"});
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["bias_factor"].get<double>(), bias_factor({3, 5}));
  EXPECT_EQ(run({"cornfield", "--rr-eu", "0.5", "--rr-ud", "2"}).code, 1);
  EXPECT_EQ(run({"cornfield", "--rr-eu", "2"}).code, 1);
  EXPECT_EQ(run({"cornfield"}).code, 1);
}

TEST(CliRender, TextAndJson) {
  auto r = run({"render", "--case", "smoking-ever"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("You are a helpful epidemiologist"), std::string::npos);
  EXPECT_NE(r.out.find("Exposure: Ever smoking"), std::string::npos);
  r = run({"render", "--case", "smoking-ever", "--json"});
  const auto bundle = bundle_from_json(nlohmann::json::parse(r.out));
  const auto data = testutil::bundled();
  EXPECT_EQ(bundle,
            TemplateSet::load(data.templates()).render(*load_cases(data.paper_cases()).find("smoking-ever")));
  EXPECT_EQ(run({"render", "--case", "nope"}).code, 1);
}

TEST(CliAssess, RecordedChatgptWritesFiles) {
  testutil::TempDir dir;
  const auto r = run({"assess", "--provider", "chatgpt", "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Cases: 11, E-values parsed: 11, bias 0.00: 11, max |bias|: 0.00"), std::string::npos)
      << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "summary.md"));
  for (const char* f : {"prompt.json", "response.txt", "assessment.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "cases" / "environment-pcb" / f)) << f;
  }
  const auto a = assessment_from_json(
      nlohmann::json::parse(read_text_file(dir / "out" / "cases" / "environment-pcb" / "assessment.json")));
  EXPECT_EQ(a.reported_evalue, 4.25);
  EXPECT_EQ(a.conclusion, ConclusionLabel::Unlikely);
}

TEST(CliAssess, JsonParsesBack) {
  const auto r = run({"assess", "--provider", "deepseek", "--json"});
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j["outcomes"].size(), 11u);
  const auto first = outcome_from_json(j["outcomes"][0]);
  EXPECT_EQ(first.case_id, "smoking-ever");
  EXPECT_EQ(first.assessment->reported_evalue, 3.916);
}

TEST(CliAssess, MissingTranscriptIsExitTwoListingKeys) {
  testutil::TempDir dir;
  std::filesystem::create_directories(dir / "empty");
  const auto r = run({"assess", "--provider", "claude", "--transcripts", (dir / "empty").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("MissingTranscript"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 12) << r.err;  // headline + 11 keys
}

TEST(CliAssess, UnwritableOutIsExitOne) {
  testutil::TempDir dir;
  write_text_file(dir / "file", "x");
  const auto r = run({"assess", "--provider", "chatgpt", "--out", (dir / "file" / "out").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("IoError"), std::string::npos);
}

TEST(CliAssess, UnknownProviderIsExitOne) { EXPECT_EQ(run({"assess", "--provider", "mistral"}).code, 1); }

TEST(CliAssess, LiveWithoutCredentialIsExitTwo) {
  NetworkProbe probe;
  const auto r = run({"assess", "--provider", "gemini", "--transport", "live"}, probe.context());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("GEMINI_API_KEY"), std::string::npos);
  EXPECT_EQ(probe.attempts->load(), 0);
}

TEST(CliAssess, LiveTransportFailureIsExitTwo) {
  NetworkProbe probe;
  auto ctx = probe.context();
  ctx.env = [](const std::string&) { return std::optional<std::string>("k"); };
  const auto r = run({"assess", "--provider", "chatgpt", "--transport", "live", "--parallel", "2"}, ctx);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(probe.attempts->load(), 11);
  EXPECT_NE(r.err.find("TransportError"), std::string::npos);
}

TEST(CliEvaluate, CsvOutputDeterministicAcrossParallelism) {
  testutil::TempDir dir;
  ASSERT_EQ(run({"evaluate", "--format", "csv", "--parallel", "1", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run({"evaluate", "--format", "csv", "--parallel", "4", "--out", (dir / "b").string()}).code, 0);
  for (const char* f : {"bias.csv", "conclusions.csv", "confounders.csv", "summary.csv"}) {
    EXPECT_EQ(read_text_file(dir / "a" / f), read_text_file(dir / "b" / f)) << f;
  }
  EXPECT_EQ(read_text_file(dir / "a" / "bias.csv").rfind("case_id,provider_id,reported_evalue,truth_evalue,bias\n", 0),
            0u);
}

TEST(CliEvaluate, MarkdownToStdoutAndJson) {
  auto r = run({"evaluate"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("## Suggested unmeasured confounders"), std::string::npos);
  r = run({"evaluate", "--json"});
  ASSERT_EQ(r.code, 0);
  const auto cases = load_cases(testutil::bundled().paper_cases());
  const auto report = report_from_json(nlohmann::json::parse(r.out), cases);
  EXPECT_EQ(report.conclusion_for("environment-pcb", "deepseek")->label, ConclusionLabel::Possibly);
  EXPECT_EQ(report.bias_table.size(), 44u);
}

TEST(CliEvaluate, BadInputsAreExitOne) {
  EXPECT_EQ(run({"evaluate", "--study", "/nonexistent.json"}).code, 1);
  EXPECT_EQ(run({"evaluate", "--format", "pdf"}).code, 1);
  EXPECT_EQ(run({"evaluate", "--transport", "carrier-pigeon"}).code, 1);
  testutil::TempDir dir;
  write_text_file(dir / "p.json", R"({"version":"1","providers":[{"provider_id":"x","model_id":"y","api_key":"s"}]})");
  EXPECT_EQ(run({"evaluate", "--providers", (dir / "p.json").string()}).code, 1);
}

TEST(CliVerify, PristineCheckoutPasses) {
  const auto r = run({"verify"});
  EXPECT_EQ(r.code, 0) << r.out;
  for (int i = 1; i <= 9; ++i) {
    EXPECT_NE(r.out.find("PASS " + std::to_string(i) + "."), std::string::npos) << i;
  }
  const auto j = run({"verify", "--json"});
  const auto doc = nlohmann::json::parse(j.out);
  EXPECT_TRUE(doc["passed"].get<bool>());
  ASSERT_EQ(doc["checks"].size(), 9u);
  EXPECT_EQ(check_from_json(doc["checks"][5]).id, 6);
}

TEST(CliVerify, TamperedTruthIsExitThree) {
  testutil::TempDir dir;
  const auto data = testutil::copy_bundled(dir);
  auto text = read_text_file(data.paper_cases());
  const auto at = text.find("3.686");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 5, "3.0");
  write_text_file(data.paper_cases(), text);
  const auto r = run({"verify", "--data-dir", data.root.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("FAIL 1. E-value reproduction"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("smoking-ever"), std::string::npos);
}

TEST(CliVerify, TamperedTranscriptIsExitThree) {
  testutil::TempDir dir;
  const auto data = testutil::copy_bundled(dir);
  const auto cases = load_cases(data.paper_cases());
  const auto providers = load_provider_configs(data.paper_providers());
  const auto bundle = TemplateSet::load(data.templates()).render(*cases.find("backpain-bmi-5"));
  const auto path = TranscriptStore(data.transcripts()).path_for(transcript_key(providers[1], bundle.fingerprint));
  auto j = nlohmann::ordered_json::parse(read_text_file(path));
  auto text = j["response_text"].get<std::string>();
  const auto at = text.find("Conclusion: Highly likely");
  ASSERT_NE(at, std::string::npos) << text;
  text.replace(at, 25, "Conclusion: Possibly");
  j["response_text"] = text;
  write_text_file(path, j.dump(2) + "\n");
  const auto r = run({"verify", "--data-dir", data.root.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("FAIL 6."), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("backpain-bmi-5/claude conclusion Possibly expected Highly likely"), std::string::npos);
}
