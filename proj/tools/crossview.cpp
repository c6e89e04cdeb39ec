#include <iostream>
#include <string>
#include <vector>

#include "crossview/cli.hpp"

int main(int argc, char** argv) {
  crossview::cli::configure_logging();
  std::vector<std::string> args(argv + 1, argv + argc);
  return crossview::cli::run(args, std::cout, std::cerr);
}
