#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <iostream>

#include "mma/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const char* term = std::getenv("TERM");
  mma::CliOptions options;
  options.color = std::getenv("NO_COLOR") == nullptr && isatty(STDERR_FILENO) && !(term && std::strcmp(term, "dumb") == 0);
  return mma::run_cli(args, std::cout, std::cerr, options);
}
