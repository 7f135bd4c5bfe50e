#include <iostream>
#include <string>
#include <vector>

#include "patchstart/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return patchstart::run_cli(args, std::cout, std::cerr);
}
