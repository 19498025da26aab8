#include <string>
#include <vector>

#include "slurmlens/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return slurmlens::cli::main_entry(args);
}
