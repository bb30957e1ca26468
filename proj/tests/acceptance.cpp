// Acceptance checklist: one PASS/FAIL line per criterion, non-zero exit on
// any failure.

#include <iostream>

#include "evsens/paths.hpp"
#include "evsens/verify.hpp"

int main() {
  const auto checks = evsens::verify_paper(evsens::DataLayout{evsens::default_data_dir()});
  int failed = 0;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name;
    if (!c.detail.empty()) std::cout << " [" << c.detail << "]";
    std::cout << "\n";
    if (!c.passed) ++failed;
  }
  std::cout << (checks.size() - failed) << "/" << checks.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
