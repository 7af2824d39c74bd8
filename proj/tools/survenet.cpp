#include <iostream>
#include <string>
#include <vector>

#include "survenet/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return survenet::run_cli(args, std::cout, std::cerr);
}
