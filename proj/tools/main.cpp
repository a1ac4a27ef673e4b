#include <iostream>
#include <string>
#include <vector>

#include "cegzsl/cli.hpp"

int main(int argc, char** argv) {
  return cegzsl::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
