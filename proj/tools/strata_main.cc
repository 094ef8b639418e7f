#include <iostream>
#include <string>
#include <vector>

#include "strata/app.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return strata::app::run(args, std::cout, std::cerr);
}
