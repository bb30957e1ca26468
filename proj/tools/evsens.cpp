#include <atomic>
#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include "evsens/cli.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);
  evsens::CliContext ctx;
  ctx.cancel = &g_interrupted;
  return evsens::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr, ctx);
}
