#include "commands.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  return imt::cli::run(argc, argv, std::cout, std::cerr, [](const char* name) { return std::getenv(name); });
}
