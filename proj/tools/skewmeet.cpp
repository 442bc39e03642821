#include "skewmeet/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> env_threads;
  if (const char* v = std::getenv(std::string(skewmeet::cli::kThreadsEnv).c_str())) {
    env_threads = v;
  }
  return skewmeet::cli::main(args, std::cout, std::cerr, env_threads);
}
