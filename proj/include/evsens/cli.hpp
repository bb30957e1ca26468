#pragma once

// The `evsens` command line. run_cli is separate from main() so tests can
// drive it with captured streams and a fake HTTP client.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "evsens/error.hpp"
#include "evsens/format.hpp"
#include "evsens/gateway.hpp"
#include "evsens/harness.hpp"
#include "evsens/http_client.hpp"
#include "evsens/paths.hpp"
#include "evsens/prompt.hpp"
#include "evsens/report.hpp"
#include "evsens/sensitivity.hpp"
#include "evsens/study.hpp"
#include "evsens/verify.hpp"

namespace evsens {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kInvalid = 1;
inline constexpr int kTransport = 2;
inline constexpr int kVerification = 3;
}  // namespace exit_code

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::TransportError:
    case ErrorKind::MissingTranscript:
    case ErrorKind::MissingCredential:
    case ErrorKind::ProviderError:
      return exit_code::kTransport;
    default:
      return exit_code::kInvalid;
  }
}

inline nlohmann::ordered_json to_json(const SensitivityResult& r) {
  return {{"evalue", r.evalue},
          {"effective_rr", r.effective_rr},
          {"cornfield_exposure_threshold", r.cornfield_exposure_threshold},
          {"band", std::string(to_string(r.band))}};
}

inline SensitivityResult sensitivity_from_json(const nlohmann::json& j) {
  SensitivityResult r;
  r.evalue = j.at("evalue").get<double>();
  r.effective_rr = j.at("effective_rr").get<double>();
  r.cornfield_exposure_threshold = j.at("cornfield_exposure_threshold").get<double>();
  const auto band = parse_band(j.at("band").get<std::string>());
  if (!band) throw Error(ErrorKind::ParseError, "unknown band '" + j.at("band").get<std::string>() + "'");
  r.band = *band;
  return r;
}

inline nlohmann::ordered_json to_json(const Check& c) {
  return {{"id", c.id}, {"name", c.name}, {"passed", c.passed}, {"detail", c.detail}};
}

inline Check check_from_json(const nlohmann::json& j) {
  return {j.at("id").get<int>(), j.at("name").get<std::string>(), j.at("passed").get<bool>(),
          j.at("detail").get<std::string>()};
}

/// Injection points for tests. Defaults talk to the real network and process
/// environment.
struct CliContext {
  HttpClientFactory http = httplib_factory();
  EnvLookup env = process_env;
  RetryPolicy retry = {};
  const std::atomic<bool>* cancel = nullptr;
};

namespace cli_detail {

struct RunOptions {
  std::string data_dir;
  std::string study;
  std::string providers;
  std::string transcripts;
  std::string transport = "recorded";
  std::string out;
  std::size_t parallel = 4;
  std::string format = "md";
};

inline DataLayout layout(const RunOptions& o) {
  return DataLayout{o.data_dir.empty() ? default_data_dir() : std::filesystem::path(o.data_dir)};
}

inline TransportMode transport_of(const RunOptions& o) {
  const auto mode = parse_transport(o.transport);
  if (!mode) throw Error(ErrorKind::ConfigError, "unknown transport '" + o.transport + "'");
  return *mode;
}

inline std::string opt_num(const std::optional<double>& v, int decimals) {
  return v ? fmt::fixed(*v, decimals) : std::string("n/a");
}

inline std::string assess_summary(const EvalReport& r) {
  std::ostringstream s;
  s << "# Assessment summary\n\n";
  for (const auto& p : r.summary) {
    s << "Provider: " << p.provider_id << "\n";
    s << "Cases: " << p.pairs << ", E-values parsed: " << p.evalues_parsed << ", bias 0.00: " << p.exact_matches
      << ", max |bias|: " << opt_num(p.max_abs_bias, 2) << "\n\n";
  }
  s << "| case_id | reported E-value | true E-value | bias | conclusion | confounders |\n";
  s << "|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < r.bias_table.size(); ++i) {
    const auto& b = r.bias_table[i];
    const auto& c = r.conclusion_matrix[i];
    const auto& o = r.outcomes[i];
    std::string conf;
    if (o.assessment) {
      for (const auto& item : o.assessment->confounders) conf += (conf.empty() ? "" : "; ") + item;
    }
    s << "| " << b.case_id << " | " << opt_num(b.reported_evalue, 3) << " | " << fmt::fixed(b.truth_evalue, 3)
      << " | " << opt_num(b.bias, 2) << " | " << (c.label ? std::string(to_display(*c.label)) : "n/a") << " | "
      << report_detail::md_cell(conf.empty() ? "n/a" : conf) << " |\n";
  }
  bool any_warning = false;
  for (const auto& o : r.outcomes) {
    for (const auto& w : o.warnings) {
      if (!any_warning) s << "\n## Warnings\n\n";
      any_warning = true;
      s << "- " << o.case_id << ": " << w << "\n";
    }
    if (o.error) s << "- " << o.case_id << ": error: " << *o.error << "\n";
  }
  return s.str();
}

inline void print_errors(const EvalReport& r, std::ostream& err) {
  for (const auto& o : r.outcomes) {
    if (o.error) err << o.case_id << " / " << o.provider_id << ": " << *o.error << "\n";
  }
}

}  // namespace cli_detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                   const CliContext& ctx = {}) {
  using cli_detail::RunOptions;
  CLI::App app{"E-value sensitivity analysis and LLM assessment harness", "evsens"};
  app.require_subcommand(1);
  bool json = false;

  auto* evalue = app.add_subcommand("evalue", "E-value for a single effect estimate");
  double value = 0.0;
  std::string measure = "rr";
  evalue->add_option("--value", value, "Point estimate (RR, OR or HR)")->required();
  evalue->add_option("--measure", measure, "rr, or or hr");
  evalue->add_flag("--json", json, "Machine-readable output");

  auto* cornfield = app.add_subcommand("cornfield", "Confounding bias factor or required strength");
  std::optional<double> rr_eu, rr_ud, cf_value;
  cornfield->add_option("--rr-eu", rr_eu, "Exposure-confounder risk ratio");
  cornfield->add_option("--rr-ud", rr_ud, "Confounder-outcome risk ratio");
  cornfield->add_option("--value", cf_value, "Observed estimate; prints the strength needed to explain it away");
  cornfield->add_option("--measure", measure, "rr, or or hr");
  cornfield->add_flag("--json", json, "Machine-readable output");

  RunOptions opts;
  auto* render = app.add_subcommand("render", "Render the assessment prompt for one case");
  std::string case_id;
  render->add_option("--study", opts.study, "Case-set JSON (default: bundled paper cases)");
  render->add_option("--case", case_id, "Case id")->required();
  render->add_option("--data-dir", opts.data_dir, "Data directory holding templates/");
  render->add_flag("--json", json, "Machine-readable output");

  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--study", opts.study, "Case-set JSON (default: bundled paper cases)");
    sub->add_option("--providers", opts.providers, "Provider config JSON (default: bundled paper providers)");
    sub->add_option("--transcripts", opts.transcripts, "Transcript directory");
    sub->add_option("--transport", opts.transport, "live, recorded or record")
        ->check(CLI::IsMember({"live", "recorded", "record"}));
    sub->add_option("--out", opts.out, "Output directory");
    sub->add_option("--parallel", opts.parallel, "Maximum concurrent requests")->check(CLI::Range(1, 64));
    sub->add_option("--data-dir", opts.data_dir, "Data directory");
    sub->add_flag("--json", json, "Machine-readable output");
  };

  auto* assess = app.add_subcommand("assess", "Assess every case of a study with one provider");
  std::string provider_id;
  add_run_options(assess);
  assess->add_option("--provider", provider_id, "Provider id from the config")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Run all providers and emit the comparison report");
  add_run_options(evaluate);
  evaluate->add_option("--format", opts.format, "md or csv")->check(CLI::IsMember({"md", "csv"}));

  auto* verify = app.add_subcommand("verify", "Reproduce the bundled paper results offline");
  verify->add_option("--data-dir", opts.data_dir, "Data directory");
  verify->add_flag("--json", json, "Machine-readable output");

  std::vector<const char*> argv{"evsens"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::kOk : exit_code::kInvalid;
  }

  const auto emit_json = [&](const nlohmann::ordered_json& j) { out << j.dump(2) << "\n"; };

  try {
    if (*evalue) {
      const auto m = parse_measure(measure);
      if (!m) throw Error(ErrorKind::ValidationError, "unknown measure '" + measure + "'");
      const auto r = evalue_point({*m, value, {}});
      if (json) {
        emit_json(to_json(r));
      } else {
        out << "E-value: " << fmt::fixed(r.evalue, 3) << "\n"
            << "Effective ratio: " << fmt::fixed(r.effective_rr, 3) << "\n"
            << "Cornfield threshold: " << fmt::fixed(r.cornfield_exposure_threshold, 3) << "\n"
            << "Band: " << to_string(r.band) << "\n";
      }
      return exit_code::kOk;
    }

    if (*cornfield) {
      nlohmann::ordered_json j = nlohmann::ordered_json::object();
      if (cf_value) {
        const auto m = parse_measure(measure);
        if (!m) throw Error(ErrorKind::ValidationError, "unknown measure '" + measure + "'");
        const double need = cornfield_required_strength({*m, *cf_value, {}});
        j["value"] = *cf_value;
        j["required_strength"] = need;
        if (!json) out << "Required strength (RR_EU and RR_UD): " << fmt::fixed(need, 3) << "\n";
      }
      if (rr_eu || rr_ud) {
        if (!rr_eu || !rr_ud) throw Error(ErrorKind::ValidationError, "--rr-eu and --rr-ud go together");
        const ConfounderStrength s{*rr_eu, *rr_ud};
        const double b = bias_factor(s);
        const auto grid = max_collapsed_rr(s);
        j["rr_eu"] = s.rr_eu;
        j["rr_ud"] = s.rr_ud;
        j["bias_factor"] = b;
        j["grid_maximum"] = {{"rr", grid.rr}, {"p1", grid.p1}, {"p0", grid.p0}};
        if (!json) {
          out << "Bias factor: " << fmt::fixed(b, 3) << "\n"
              << "Grid maximum: " << fmt::fixed(grid.rr, 3) << " at p1=" << fmt::fixed(grid.p1, 3)
              << ", p0=" << fmt::fixed(grid.p0, 3) << "\n";
        }
      }
      if (j.empty()) throw Error(ErrorKind::ValidationError, "give --value or both --rr-eu and --rr-ud");
      if (json) emit_json(j);
      return exit_code::kOk;
    }

    const auto data = cli_detail::layout(opts);

    if (*render) {
      const auto cases = load_cases(opts.study.empty() ? data.paper_cases() : std::filesystem::path(opts.study));
      const auto* c = cases.find(case_id);
      if (!c) throw Error(ErrorKind::ValidationError, "no case '" + case_id + "' in the study file");
      const auto bundle = TemplateSet::load(data.templates()).render(*c);
      if (json) {
        emit_json(to_json(bundle));
      } else {
        out << "=== system ===\n" << bundle.system << "\n=== user ===\n" << bundle.user << "\n"
            << "=== fingerprint ===\n" << bundle.fingerprint << "\n";
      }
      return exit_code::kOk;
    }

    if (*verify) {
      const auto checks = verify_paper(data);
      bool all = true;
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      for (const auto& c : checks) {
        all = all && c.passed;
        j.push_back(to_json(c));
        if (!json) {
          out << (c.passed ? "PASS " : "FAIL ") << c.id << ". " << c.name;
          if (!c.passed && !c.detail.empty()) out << " -- " << c.detail;
          out << "\n";
        }
      }
      if (json) {
        emit_json({{"passed", all}, {"checks", j}});
      } else {
        out << (all ? "all checks passed" : "verification failed") << "\n";
      }
      return all ? exit_code::kOk : exit_code::kVerification;
    }

    // assess / evaluate
    const auto mode = cli_detail::transport_of(opts);
    const auto cases = load_cases(opts.study.empty() ? data.paper_cases() : std::filesystem::path(opts.study));
    auto providers =
        load_provider_configs(opts.providers.empty() ? data.paper_providers() : std::filesystem::path(opts.providers));
    const auto templates = TemplateSet::load(data.templates());
    auto store = std::make_shared<TranscriptStore>(opts.transcripts.empty() ? data.transcripts()
                                                                            : std::filesystem::path(opts.transcripts));
    Gateway gateway(store, ctx.http, ctx.retry, ctx.env);
    PipelineOptions pipeline{opts.parallel, ctx.cancel};

    if (*assess) {
      const auto it = std::find_if(providers.begin(), providers.end(),
                                   [&](const ProviderConfig& p) { return p.provider_id == provider_id; });
      if (it == providers.end()) throw Error(ErrorKind::ConfigError, "no provider '" + provider_id + "' in config");
      providers = {*it};
    }

    const auto report = run_pipeline(cases, providers, templates, gateway, mode, pipeline);
    const bool cancelled = ctx.cancel && ctx.cancel->load();

    if (*assess) {
      if (!opts.out.empty()) {
        const std::filesystem::path dir(opts.out);
        std::error_code ec;
        std::filesystem::create_directories(dir / "cases", ec);
        if (ec) throw Error(ErrorKind::IoError, "cannot create output directory " + dir.string() + ": " + ec.message());
        for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
          const auto& o = report.outcomes[i];
          const auto case_dir = dir / "cases" / o.case_id;
          std::filesystem::create_directories(case_dir, ec);
          if (ec) throw Error(ErrorKind::IoError, "cannot create " + case_dir.string() + ": " + ec.message());
          auto bundle = templates.render(cases.cases[i]);
          write_text_file(case_dir / "prompt.json", to_json(bundle).dump(2) + "\n");
          write_text_file(case_dir / "response.txt", o.raw_response);
          if (o.assessment) write_text_file(case_dir / "assessment.json", to_json(*o.assessment).dump(2) + "\n");
        }
        write_text_file(dir / "summary.md", cli_detail::assess_summary(report));
      }
      if (json) {
        nlohmann::ordered_json outcomes = nlohmann::ordered_json::array();
        for (const auto& o : report.outcomes) outcomes.push_back(to_json(o));
        emit_json({{"provider_id", provider_id}, {"outcomes", outcomes}, {"report", to_json(report)}});
      } else {
        out << cli_detail::assess_summary(report);
      }
    } else {
      if (!opts.out.empty()) {
        const auto format = opts.format == "csv" ? ReportFormat::Csv : ReportFormat::Markdown;
        for (const auto& p : emit_report(report, format, opts.out)) {
          if (!json) err << "wrote " << p.string() << "\n";
        }
      }
      if (json) {
        emit_json(to_json(report));
      } else if (opts.out.empty()) {
        out << render_markdown(report);
      }
    }

    cli_detail::print_errors(report, err);
    if (cancelled) {
      err << "interrupted; completed transcripts were kept\n";
      return exit_code::kTransport;
    }
    return report.has_errors() ? exit_code::kTransport : exit_code::kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    for (const auto& d : e.details()) err << "  " << d << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kInvalid;
  }
}

}  // namespace evsens
