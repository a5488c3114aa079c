#include <iostream>

#include "icmm/cli.hpp"

int main(int argc, char** argv) {
  return icmm::run_cli(argc, argv, std::cout, std::cerr);
}
