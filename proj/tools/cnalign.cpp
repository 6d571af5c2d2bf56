#include <iostream>
#include <string>
#include <vector>

#include "cnalign/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cnalign::run_cli(args, std::cout, std::cerr);
}
