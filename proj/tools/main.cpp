#include <iostream>
#include <string>
#include <vector>

#include "swarical/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return swarical::cli::run(args, std::cout, std::cerr);
}
