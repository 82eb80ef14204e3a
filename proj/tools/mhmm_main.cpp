#include <string>
#include <vector>

#include "mhmm/cli/app.hpp"

int main(int argc, char** argv) {
  return mhmm::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
