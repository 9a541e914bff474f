#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nf/gvo/gvo.hpp"
#include "nf/ngl/ngl.hpp"

namespace nf::cli {

// Everything a subcommand needs. Keys accepted by set() are the ones
// to_text() prints; "preset" is the only key that is not a field and
// resets the ngl.* and gvo.* groups.
struct RunConfig {
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;  // 0: library default

  std::string input;
  std::string gt;
  std::string pred;
  std::string outdir = "out";
  std::string name;
  std::string stage = "refined";  // coarse | refined
  std::string ngl_checkpoint;
  std::string gvo_checkpoint;
  bool ply = false;

  // synth
  std::string kind = "sphere";
  std::size_t n = 5000;
  double noise = 0.0;
  std::string density = "none";

  // train-gvo
  std::size_t corpus_n = 5000;
  std::vector<std::string> inputs;

  // evaluate
  std::string baseline = "none";  // none | pca | pca+mst
  std::size_t pca_k = 24;
  std::size_t mst_k = 12;
  bool flip_table = false;

  ngl::NglConfig ngl = ngl::NglConfig::desk();
  gvo::GvoConfig gvo = gvo::GvoConfig::desk();

  // Throws InvalidArgument on unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  void apply_preset(std::string_view preset);

  std::string to_text() const;
  void validate() const;
};

struct KeyValue {
  std::string key;
  std::string value;
};

// "key = value" lines, '#' starts a comment. Throws InvalidArgument naming
// the line on malformed input.
std::vector<KeyValue> parse_config_text(std::string_view text);

// Applies "preset" entries first, then the rest in order.
void apply_settings(RunConfig& cfg, const std::vector<KeyValue>& settings);

RunConfig parse_run_config(std::string_view text);

}  // namespace nf::cli
