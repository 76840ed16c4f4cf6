#include <vector>

#include "plfam/cli.hpp"

int main(int argc, char** argv) {
  return plfam::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
