// Regenerates data/transcripts from the paper fixture description.
// Run after editing templates, cases, providers or paper_llm_outputs.json.

#include <filesystem>
#include <iostream>

#include "evsens/paths.hpp"
#include "paper_fixtures.hpp"

int main(int argc, char** argv) {
  using namespace evsens;
  const DataLayout data{argc > 1 ? std::filesystem::path(argv[1]) : default_data_dir()};
  try {
    const auto cases = load_cases(data.paper_cases());
    const auto providers = load_provider_configs(data.paper_providers());
    const auto templates = TemplateSet::load(data.templates());
    const auto outputs = fixtures::load_paper_outputs(data.paper_outputs());
    const auto transcripts = fixtures::build_paper_transcripts(cases, providers, templates, outputs);

    for (const auto& entry : std::filesystem::directory_iterator(data.transcripts())) {
      if (entry.path().extension() == ".json") std::filesystem::remove(entry.path());
    }
    TranscriptStore store(data.transcripts());
    for (const auto& t : transcripts) store.save(t);
    std::cout << "wrote " << transcripts.size() << " transcripts to " << data.transcripts() << "\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
