#include <iostream>
#include <string>
#include <vector>

#include "mdsrecover/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return mdsr::cli::run(args, std::cout, std::cerr);
}
