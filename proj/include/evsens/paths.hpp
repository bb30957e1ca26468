#pragma once

#include <cstdlib>
#include <filesystem>

#ifndef EVSENS_DEFAULT_DATA_DIR
#define EVSENS_DEFAULT_DATA_DIR "data"
#endif

namespace evsens {

/// Bundled data root: $EVSENS_DATA_DIR if set, otherwise the build-time
/// location of data/.
inline std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("EVSENS_DATA_DIR"); env && *env) return env;
  return EVSENS_DEFAULT_DATA_DIR;
}

struct DataLayout {
  std::filesystem::path root;

  [[nodiscard]] std::filesystem::path templates() const { return root / "templates"; }
  [[nodiscard]] std::filesystem::path paper_cases() const {
    return root / "cases" / "paper_cases.json";
  }
  [[nodiscard]] std::filesystem::path paper_providers() const {
    return root / "providers" / "paper_providers.json";
  }
  [[nodiscard]] std::filesystem::path transcripts() const { return root / "transcripts"; }
  [[nodiscard]] std::filesystem::path paper_outputs() const {
    return root / "fixtures" / "paper_llm_outputs.json";
  }
};

}  // namespace evsens
