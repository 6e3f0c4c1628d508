#include <iostream>
#include <string>
#include <vector>

#include "febounds/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return febounds::run_cli(args, std::cout, std::cerr);
}
