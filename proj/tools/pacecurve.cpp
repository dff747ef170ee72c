#include <string>
#include <vector>

#include "pacecurve/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pacecurve::cli::run(std::move(args));
}
