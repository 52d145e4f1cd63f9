#include <iostream>
#include <string>
#include <vector>

#include "freeknot/cli_io.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return freeknot::run_command(args, std::cout, std::cerr);
}
