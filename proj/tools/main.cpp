#include <iostream>
#include <string>
#include <vector>

#include "sentcomp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sentcomp::cli::run(args, std::cout, std::cerr);
}
