#include <iostream>
#include <string>
#include <vector>

#include "bdf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bdf::run_cli(args, std::cout, std::cerr);
}
