#include <iostream>

#include "fracgen/cli/cli.hpp"

int main(int argc, char** argv) {
  return fracgen::cli::dispatch(argc, argv, std::cout, std::cerr);
}
