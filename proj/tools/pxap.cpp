#include <string>
#include <vector>

#include "pxap/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pxap::cli::main_with_args(args);
}
