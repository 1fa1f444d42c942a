#include <iostream>

#include "cli.hpp"
#include "ownerrel/runtime.hpp"

int main(int argc, char** argv) {
  ownerrel::keep_large_allocations();
  return ownerrel::cli::run(argc, argv, std::cout, std::cerr);
}
