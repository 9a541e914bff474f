#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nf/cli/run_config.hpp"

namespace nf::cli {

enum ExitCode : int { kOk = 0, kIoFailure = 1, kUsage = 2, kNumerical = 3 };

struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path normals() const { return root / "normals"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path logs() const { return root / "logs"; }

  void create() const;
};

int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_fit_ngl(const RunConfig& cfg, std::ostream& out);
int cmd_train_gvo(const RunConfig& cfg, std::ostream& out);
int cmd_estimate(const RunConfig& cfg, std::ostream& out);
int cmd_evaluate(const RunConfig& cfg, std::ostream& out);

// Parses the command line (args[0] is the program name), dispatches and maps
// exceptions to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nf::cli
