#include <iostream>
#include <string>
#include <vector>

#include "mcdimpute/cli.hpp"

int main(int argc, char** argv) {
  return mcdi::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
