#pragma once

// Reproduction checklist for the bundled paper fixtures. Runs entirely on
// recorded transcripts; any HTTP attempt counts as a failure.

#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "evsens/gateway.hpp"
#include "evsens/harness.hpp"
#include "evsens/parser.hpp"
#include "evsens/paths.hpp"
#include "evsens/report.hpp"
#include "evsens/sensitivity.hpp"
#include "evsens/study.hpp"
#include "evsens/synthetic.hpp"

namespace evsens {

struct Check {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// HttpClient that records and refuses every request.
class NoNetworkClient final : public HttpClient {
 public:
  explicit NoNetworkClient(std::atomic<int>& attempts) : attempts_(attempts) {}
  HttpResponse post(const std::string&, const HttpHeaders&, const std::string&) override {
    ++attempts_;
    return {0, {}, "network access is disabled"};
  }

 private:
  std::atomic<int>& attempts_;
};

namespace paper {

/// Bias of the DeepSeek E-values, in case-set order.
inline constexpr std::array<double, 11> kDeepSeekBias = {0.23, -0.01, 0.10, 0.12, 0.10, 0.14,
                                                         0.14, 0.10,  0.13, 0.19, 0.01};

/// Conclusions per case for chatgpt, claude, deepseek, gemini.
inline const std::vector<std::pair<std::string, std::array<ConclusionLabel, 4>>>& conclusion_table() {
  using L = ConclusionLabel;
  static const std::vector<std::pair<std::string, std::array<L, 4>>> t = {
      {"smoking-ever", {L::Unlikely, L::Unlikely, L::Possibly, L::Possibly}},
      {"smoking-maternal", {L::Possibly, L::Possibly, L::Possibly, L::Possibly}},
      {"smoking-household", {L::Possibly, L::Possibly, L::Possibly, L::Possibly}},
      {"backpain-bmi-5", {L::Possibly, L::HighlyLikely, L::Possibly, L::Possibly}},
      {"backpain-bmi-10", {L::Possibly, L::Possibly, L::Possibly, L::Possibly}},
      {"backpain-bmi-15", {L::Possibly, L::Possibly, L::Possibly, L::Possibly}},
      {"backpain-bmi-20", {L::Possibly, L::Possibly, L::Possibly, L::Possibly}},
      {"alzheimer-no-drug", {L::HighlyLikely, L::HighlyLikely, L::Possibly, L::HighlyLikely}},
      {"alzheimer-memantine", {L::HighlyLikely, L::HighlyLikely, L::Possibly, L::HighlyLikely}},
      {"alzheimer-donepezil", {L::Possibly, L::HighlyLikely, L::Possibly, L::HighlyLikely}},
      {"environment-pcb", {L::Unlikely, L::Unlikely, L::Possibly, L::Unlikely}},
  };
  return t;
}

inline constexpr std::array<const char*, 4> kProviders = {"chatgpt", "claude", "deepseek", "gemini"};

}  // namespace paper

struct ReplayRun {
  EvalReport report;
  int network_attempts = 0;
};

inline ReplayRun replay_paper(const DataLayout& data, std::size_t parallelism) {
  std::atomic<int> attempts{0};
  auto store = std::make_shared<TranscriptStore>(data.transcripts());
  Gateway gateway(store, [&attempts] { return std::make_shared<NoNetworkClient>(attempts); });
  const auto cases = load_cases(data.paper_cases());
  const auto providers = load_provider_configs(data.paper_providers());
  const auto templates = TemplateSet::load(data.templates());
  PipelineOptions options;
  options.parallelism = parallelism;
  ReplayRun run;
  run.report = run_pipeline(cases, providers, templates, gateway, TransportMode::Recorded, options);
  run.network_attempts = attempts.load();
  return run;
}

inline std::string emit_all(const EvalReport& r) {
  std::string out = render_markdown(r);
  for (const auto& [name, text] : render_csv(r)) out += "== " + name + "\n" + text;
  return out;
}

inline std::vector<Check> verify_paper(const DataLayout& data) {
  std::vector<Check> checks;
  auto run = [&](int id, std::string name, auto&& body) {
    Check c{id, std::move(name), false, {}};
    try {
      std::ostringstream detail;
      c.passed = body(detail);
      c.detail = detail.str();
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = e.what();
    }
    checks.push_back(std::move(c));
  };

  run(1, "E-value reproduction (fixture cases within 0.005)", [&](std::ostream& d) {
    const auto cases = load_cases(data.paper_cases());
    int with_truth = 0;
    bool ok = true;
    for (const auto& c : cases.cases) {
      if (!c.truth_evalue) continue;
      ++with_truth;
      const double e = evalue_point(c.estimate).evalue;
      if (std::abs(e - *c.truth_evalue) > 0.005) {
        ok = false;
        d << c.case_id << ": computed " << fmt::fixed(e, 4) << " vs truth " << fmt::shortest(*c.truth_evalue) << "; ";
      }
    }
    if (with_truth != 11) {
      ok = false;
      d << with_truth << " cases carry a true E-value, expected 11; ";
    }
    return ok;
  });

  run(2, "Worked example RR = 3.6 -> 6.66", [&](std::ostream& d) {
    const double e = evalue_point({EffectMeasure::RiskRatio, 3.6, {}}).evalue;
    d << "computed " << fmt::fixed(e, 4);
    return std::abs(e - 6.66) <= 0.005;
  });

  run(3, "Protective estimates are inverted (0.94 -> 1.32, 0.77 -> 1.92)", [&](std::ostream& d) {
    const double a = evalue_point({EffectMeasure::RiskRatio, 0.94, {}}).evalue;
    const double b = evalue_point({EffectMeasure::RiskRatio, 0.77, {}}).evalue;
    d << "computed " << fmt::fixed(a, 4) << ", " << fmt::fixed(b, 4);
    return std::abs(a - 1.32) <= 0.005 && std::abs(b - 1.92) <= 0.005;
  });

  run(4, "Round trip evalue(bias_factor(s, s)) == s", [&](std::ostream& d) {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(1.001, 20.0);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const double s = u(rng);
      const double e = evalue_point({EffectMeasure::RiskRatio, bias_factor({s, s}), {}}).evalue;
      worst = std::max(worst, std::abs(e - s));
    }
    d << "max error " << worst;
    return worst <= 1e-9;
  });

  run(5, "Bias factor dominates the prevalence grid and is attained", [&](std::ostream& d) {
    bool ok = true;
    for (double s : {1.5, 2.0, 3.0, 5.0}) {
      const double bound = bias_factor({s, s});
      const int steps = 200;
      for (int i = 0; i < steps; ++i) {
        const double p1 = static_cast<double>(i) / (steps - 1);
        for (int j = 0; j <= i; ++j) {
          const double p0 = static_cast<double>(j) / (steps - 1);
          if (p1 > s * p0) continue;
          if (collapsed_rr(p1, p0, s) > bound + 1e-12) {
            ok = false;
            d << "s=" << s << " exceeded at (" << p1 << ", " << p0 << "); ";
          }
        }
      }
      const double attained = collapsed_rr(1.0, 1.0 / s, s);
      if (std::abs(attained - bound) > 1e-12) {
        ok = false;
        d << "s=" << s << " optimum " << attained << " != " << bound << "; ";
      }
    }
    return ok;
  });

  std::optional<ReplayRun> replay;
  run(6, "Harness replay matches the bias column and conclusion matrix", [&](std::ostream& d) {
    replay = replay_paper(data, 4);
    const auto& r = replay->report;
    bool ok = replay->network_attempts == 0;
    if (!ok) d << replay->network_attempts << " network attempts; ";
    const auto& table = paper::conclusion_table();
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& [case_id, labels] = table[i];
      for (std::size_t p = 0; p < paper::kProviders.size(); ++p) {
        const auto* b = r.bias_for(case_id, paper::kProviders[p]);
        const auto* c = r.conclusion_for(case_id, paper::kProviders[p]);
        if (!b || !c) {
          ok = false;
          d << case_id << "/" << paper::kProviders[p] << " missing; ";
          continue;
        }
        const double expected = p == 2 ? paper::kDeepSeekBias[i] : 0.0;
        if (!b->bias || std::abs(*b->bias - expected) >= 0.005) {
          ok = false;
          d << case_id << "/" << paper::kProviders[p] << " bias "
            << (b->bias ? fmt::fixed(*b->bias, 3) : std::string("n/a")) << " expected " << fmt::fixed(expected, 2)
            << "; ";
        }
        if (c->label != labels[p]) {
          ok = false;
          d << case_id << "/" << paper::kProviders[p] << " conclusion "
            << (c->label ? std::string(to_display(*c->label)) : std::string("n/a")) << " expected "
            << to_display(labels[p]) << "; ";
        }
      }
    }
    return ok;
  });

  run(7, "Smoking-study confounders mention occupational and genetic factors", [&](std::ostream& d) {
    if (!replay) replay = replay_paper(data, 4);
    bool ok = true;
    for (const char* p : paper::kProviders) {
      const auto* cell = replay->report.confounders_for("Smoking study", p);
      bool occ = false, gen = false;
      for (const auto& item : cell ? cell->confounders : std::vector<std::string>{}) {
        const auto l = parse_detail::lower(item);
        occ = occ || l.find("occupational") != std::string::npos;
        gen = gen || l.find("genetic") != std::string::npos;
      }
      if (!occ || !gen) {
        ok = false;
        d << p << " lacks " << (occ ? "" : "occupational ") << (gen ? "" : "genetic") << "; ";
      }
    }
    return ok;
  });

  run(8, "Parser round trip on 1000 synthetic answers; substring safety", [&](std::ostream& d) {
    std::mt19937_64 rng(8128);
    int failures = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto s = random_sample(rng);
      const auto a = parse_assessment(compose_answer(s.study_case, s.content, s.style));
      double expected = 0.0;
      fmt::parse_double(s.content.evalue_text, expected);
      if (a.reported_evalue != expected || a.conclusion != s.content.label ||
          a.confounders != s.content.confounders) {
        ++failures;
      }
    }
    int unsafe = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto label = parse_conclusion(random_highly_likely_text(rng));
      if (label && *label != ConclusionLabel::HighlyLikely) ++unsafe;
    }
    d << failures << " round-trip failures, " << unsafe << " substring-safety failures";
    return failures == 0 && unsafe == 0;
  });

  run(9, "Reports are identical with parallelism 1 and 4", [&](std::ostream& d) {
    const auto a = emit_all(replay_paper(data, 1).report);
    const auto b = emit_all(replay_paper(data, 4).report);
    d << a.size() << " bytes";
    return a == b;
  });

  return checks;
}

}  // namespace evsens
