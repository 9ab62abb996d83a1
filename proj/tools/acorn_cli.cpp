#include <iostream>
#include <string>
#include <vector>

#include "acorn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return acorn::run_cli(args, std::cout, std::cerr);
}
