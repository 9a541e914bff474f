#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "nf/cli/commands.hpp"

int main(int argc, char** argv) {
  // Keep stdout for the command's own key = value output.
  spdlog::set_default_logger(spdlog::stderr_color_mt("nfield"));
  std::vector<std::string> args(argv, argv + argc);
  return nf::cli::run(args, std::cout, std::cerr);
}
