#include <iostream>

#include "zcae/commands.hpp"

int main(int argc, char** argv) {
  return zcae::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
