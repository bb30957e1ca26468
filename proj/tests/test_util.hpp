#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "evsens/paths.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("evsens-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline evsens::DataLayout bundled() { return evsens::DataLayout{evsens::default_data_dir()}; }

/// Copies the bundled data directory so a test can modify it.
inline evsens::DataLayout copy_bundled(const TempDir& dir) {
  const auto root = dir / "data";
  std::filesystem::copy(bundled().root, root, std::filesystem::copy_options::recursive);
  return evsens::DataLayout{root};
}

}  // namespace testutil
