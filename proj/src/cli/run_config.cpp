#include "nf/cli/run_config.hpp"

#include <charconv>
#include <sstream>

#include "nf/eval/metrics.hpp"

namespace nf::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw InvalidArgument("invalid value '" + std::string(value) + "' for " + std::string(key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  return parse_number<std::size_t>(key, value);
}

int parse_int(std::string_view key, std::string_view value) { return parse_number<int>(key, value); }

double parse_real(std::string_view key, std::string_view value) {
  return parse_number<double>(key, value);
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto item = trim(value.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
  std::vector<int> out;
  for (const auto& item : split_list(value)) out.push_back(parse_int(key, item));
  if (out.empty()) bad_value(key, value);
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

const char* str(bool b) { return b ? "true" : "false"; }

using eval::format_double;

}  // namespace

void RunConfig::apply_preset(std::string_view preset) {
  if (preset == "desk") {
    ngl = ngl::NglConfig::desk();
    gvo = gvo::GvoConfig::desk();
  } else if (preset == "full") {
    ngl = ngl::NglConfig{};
    gvo = gvo::GvoConfig{};
  } else {
    bad_value("preset", preset);
  }
}

void RunConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "preset") apply_preset(value);
  else if (key == "seed") { seed = parse_number<std::uint64_t>(key, value); seed_given = true; }
  else if (key == "threads") threads = parse_int(key, value);
  else if (key == "input") input = value;
  else if (key == "gt") gt = value;
  else if (key == "pred") pred = value;
  else if (key == "outdir") outdir = value;
  else if (key == "name") name = value;
  else if (key == "stage") stage = value;
  else if (key == "ngl_checkpoint") ngl_checkpoint = value;
  else if (key == "gvo_checkpoint") gvo_checkpoint = value;
  else if (key == "ply") ply = parse_bool(key, value);
  else if (key == "kind") kind = value;
  else if (key == "n") n = parse_count(key, value);
  else if (key == "noise") noise = parse_real(key, value);
  else if (key == "density") density = value;
  else if (key == "corpus_n") corpus_n = parse_count(key, value);
  else if (key == "inputs") inputs = split_list(value);
  else if (key == "baseline") baseline = value;
  else if (key == "pca_k") pca_k = parse_count(key, value);
  else if (key == "mst_k") mst_k = parse_count(key, value);
  else if (key == "flip_table") flip_table = parse_bool(key, value);
  else if (key == "ngl.k") ngl.k = parse_count(key, value);
  else if (key == "ngl.batch") ngl.batch = parse_count(key, value);
  else if (key == "ngl.iterations") ngl.iterations = parse_count(key, value);
  else if (key == "ngl.loss") ngl.loss = ngl::parse_loss_variant(value);
  else if (key == "ngl.distance") ngl.distance = ngl::parse_distance_kind(value);
  else if (key == "ngl.sigma_rank") ngl.sigma_rank = parse_count(key, value);
  else if (key == "ngl.width") ngl.shape.width = parse_int(key, value);
  else if (key == "ngl.depth") ngl.shape.depth = parse_int(key, value);
  else if (key == "ngl.skip_at") {
    if (value == "none") ngl.shape.skip_at.reset();
    else ngl.shape.skip_at = parse_int(key, value);
  }
  else if (key == "ngl.init") ngl.init = ngl::parse_init_kind(value);
  else if (key == "ngl.init_radius") ngl.init_radius = parse_real(key, value);
  else if (key == "ngl.lr") ngl.adam.learning_rate = parse_real(key, value);
  else if (key == "gvo.m") gvo.shape.m = parse_int(key, value);
  else if (key == "gvo.kernel_widths") gvo.shape.kernel_widths = parse_int_list(key, value);
  else if (key == "gvo.score_hidden") gvo.shape.score_hidden = parse_int(key, value);
  else if (key == "gvo.angle_hidden") gvo.shape.angle_hidden = parse_int_list(key, value);
  else if (key == "gvo.use_score") gvo.shape.use_score = parse_bool(key, value);
  else if (key == "gvo.use_kernel_weight") gvo.shape.use_kernel_weight = parse_bool(key, value);
  else if (key == "gvo.train_vectors") gvo.train_vectors = parse_count(key, value);
  else if (key == "gvo.test_vectors") gvo.test_vectors = parse_count(key, value);
  else if (key == "gvo.eta") gvo.eta = parse_real(key, value);
  else if (key == "gvo.lambda") gvo.lambda = parse_real(key, value);
  else if (key == "gvo.filter_hemisphere") gvo.filter_hemisphere = parse_bool(key, value);
  else if (key == "gvo.epochs") gvo.epochs = parse_count(key, value);
  else if (key == "gvo.patches_per_shape") gvo.patches_per_shape = parse_count(key, value);
  else if (key == "gvo.batch_patches") gvo.batch_patches = parse_count(key, value);
  else if (key == "gvo.lr") gvo.adam.learning_rate = parse_real(key, value);
  else if (key == "gvo.lr_final_ratio") gvo.lr_final_ratio = parse_real(key, value);
  else throw InvalidArgument("unknown setting '" + std::string(key) + "'");
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  if (seed_given) o << "seed = " << seed << "\n";
  o << "threads = " << threads << "\n"
    << "input = " << input << "\n"
    << "gt = " << gt << "\n"
    << "pred = " << pred << "\n"
    << "outdir = " << outdir << "\n"
    << "name = " << name << "\n"
    << "stage = " << stage << "\n"
    << "ngl_checkpoint = " << ngl_checkpoint << "\n"
    << "gvo_checkpoint = " << gvo_checkpoint << "\n"
    << "ply = " << str(ply) << "\n"
    << "kind = " << kind << "\n"
    << "n = " << n << "\n"
    << "noise = " << format_double(noise) << "\n"
    << "density = " << density << "\n"
    << "corpus_n = " << corpus_n << "\n"
    << "inputs = " << join(inputs) << "\n"
    << "baseline = " << baseline << "\n"
    << "pca_k = " << pca_k << "\n"
    << "mst_k = " << mst_k << "\n"
    << "flip_table = " << str(flip_table) << "\n"
    << "ngl.k = " << ngl.k << "\n"
    << "ngl.batch = " << ngl.batch << "\n"
    << "ngl.iterations = " << ngl.iterations << "\n"
    << "ngl.loss = " << ngl::to_string(ngl.loss) << "\n"
    << "ngl.distance = " << ngl::to_string(ngl.distance) << "\n"
    << "ngl.sigma_rank = " << ngl.sigma_rank << "\n"
    << "ngl.width = " << ngl.shape.width << "\n"
    << "ngl.depth = " << ngl.shape.depth << "\n"
    << "ngl.skip_at = " << (ngl.shape.skip_at ? std::to_string(*ngl.shape.skip_at) : "none") << "\n"
    << "ngl.init = " << ngl::to_string(ngl.init) << "\n"
    << "ngl.init_radius = " << format_double(ngl.init_radius) << "\n"
    << "ngl.lr = " << format_double(ngl.adam.learning_rate) << "\n"
    << "gvo.m = " << gvo.shape.m << "\n"
    << "gvo.kernel_widths = " << join(gvo.shape.kernel_widths) << "\n"
    << "gvo.score_hidden = " << gvo.shape.score_hidden << "\n"
    << "gvo.angle_hidden = " << join(gvo.shape.angle_hidden) << "\n"
    << "gvo.use_score = " << str(gvo.shape.use_score) << "\n"
    << "gvo.use_kernel_weight = " << str(gvo.shape.use_kernel_weight) << "\n"
    << "gvo.train_vectors = " << gvo.train_vectors << "\n"
    << "gvo.test_vectors = " << gvo.test_vectors << "\n"
    << "gvo.eta = " << format_double(gvo.eta) << "\n"
    << "gvo.lambda = " << format_double(gvo.lambda) << "\n"
    << "gvo.filter_hemisphere = " << str(gvo.filter_hemisphere) << "\n"
    << "gvo.epochs = " << gvo.epochs << "\n"
    << "gvo.patches_per_shape = " << gvo.patches_per_shape << "\n"
    << "gvo.batch_patches = " << gvo.batch_patches << "\n"
    << "gvo.lr = " << format_double(gvo.adam.learning_rate) << "\n"
    << "gvo.lr_final_ratio = " << format_double(gvo.lr_final_ratio) << "\n";
  return o.str();
}

void RunConfig::validate() const {
  if (stage != "coarse" && stage != "refined") bad_value("stage", stage);
  if (baseline != "none" && baseline != "pca" && baseline != "pca+mst") bad_value("baseline", baseline);
  if (threads < 0) bad_value("threads", std::to_string(threads));
  ngl.validate();
  gvo.validate();
}

std::vector<KeyValue> parse_config_text(std::string_view text) {
  std::vector<KeyValue> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    out.push_back({std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1)))});
  }
  return out;
}

void apply_settings(RunConfig& cfg, const std::vector<KeyValue>& settings) {
  for (const auto& kv : settings)
    if (kv.key == "preset") cfg.set(kv.key, kv.value);
  for (const auto& kv : settings)
    if (kv.key != "preset") cfg.set(kv.key, kv.value);
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  apply_settings(cfg, parse_config_text(text));
  return cfg;
}

}  // namespace nf::cli
