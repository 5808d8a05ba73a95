#include <string>
#include <vector>

#include "bbmlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bbm::cli_dispatch(args);
}
