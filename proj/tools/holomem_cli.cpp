#include <iostream>

#include "holomem/cli.hpp"

int main(int argc, char** argv) {
  return holomem::cli::main(argc, argv, {std::cout, std::cerr});
}
