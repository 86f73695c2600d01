#include <iostream>
#include <string>
#include <vector>

#include "drgate/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return drgate::cli::run(args, std::cout, std::cerr);
}
