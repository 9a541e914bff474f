#include "nf/cli/commands.hpp"

#include <cstdlib>
#include <deque>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/spdlog.h>

#include "nf/eval/baselines.hpp"
#include "nf/eval/metrics.hpp"
#include "nf/gvo/gvo.hpp"
#include "nf/ngl/ngl.hpp"
#include "nf/nn/checkpoint.hpp"
#include "nf/pointcloud/io.hpp"
#include "nf/pointcloud/synth.hpp"

namespace nf::cli {

namespace fs = std::filesystem;
using pointcloud::PointCloud;

void OutputLayout::create() const {
  std::error_code ec;
  for (const auto& dir : {checkpoints(), normals(), reports(), logs()}) {
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  auto f = open_output(path);
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

OutputLayout prepare(const RunConfig& cfg, const std::string& command) {
  OutputLayout layout{cfg.outdir};
  layout.create();
  write_text(layout.logs() / (command + ".config.txt"), cfg.to_text());
  return layout;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

PointCloud load_input(const RunConfig& cfg) {
  if (cfg.input.empty()) throw InvalidArgument("--input is required");
  if (!fs::exists(cfg.input)) throw IoError("input file not found: " + cfg.input);
  return pointcloud::load_cloud(cfg.input);
}

double orientation_consistency(const std::vector<Vec3>& v, const std::vector<Vec3>& gt) {
  std::size_t good = 0;
  for (std::size_t i = 0; i < v.size(); ++i) good += v[i].dot(gt[i]) > 0.0;
  return static_cast<double>(good) / static_cast<double>(v.size());
}

// Fits NGL on the normalized cloud, saves checkpoint and log, returns the
// coarse field.
NormalField fit_coarse(const RunConfig& cfg, const PointCloud& normalized, const std::string& stem,
                       const OutputLayout& layout) {
  const auto result = ngl::train_ngl(normalized, cfg.ngl, cfg.seed, [](std::size_t it, double loss) {
    if (it % 100 == 0) spdlog::info("ngl iteration {} loss {:.6f}", it, loss);
  });
  auto net = result.net;
  nn::save_mlp(layout.checkpoints() / (stem + ".ngl.ckpt"), net);

  auto log = open_output(layout.logs() / (stem + ".ngl.csv"));
  log << "iteration,loss,wall_ms\n";
  for (std::size_t i = 0; i < result.log.loss.size(); ++i) {
    log << i << ',' << eval::format_double(result.log.loss[i]) << ','
        << eval::format_double(result.log.wall_ms[i]) << '\n';
  }
  return ngl::extract_gradients(result.net, normalized).field;
}

}  // namespace

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const auto kind = pointcloud::parse_shape_kind(cfg.kind);
  const auto density = pointcloud::parse_density(cfg.density);
  const auto layout = prepare(cfg, "synth");
  auto cloud = pointcloud::synth_shape(kind, cfg.n, cfg.seed);
  if (cfg.noise > 0.0 || density != pointcloud::DensityPattern::none) {
    cloud = pointcloud::corrupt(cloud, cfg.noise, density, derive_seed(cfg.seed, 1));
  }
  const std::string name = cfg.name.empty() ? std::string(pointcloud::to_string(kind)) : cfg.name;
  const auto path = layout.root / (name + ".xyz");
  pointcloud::save_cloud(cloud, path);
  out << "points = " << path.string() << "\n"
      << "normals = " << (layout.root / (name + ".normals")).string() << "\n"
      << "count = " << cloud.size() << "\n";
  return kOk;
}

int cmd_fit_ngl(const RunConfig& cfg, std::ostream& out) {
  const auto cloud = load_input(cfg);
  const auto layout = prepare(cfg, "fit-ngl");
  const std::string stem = cfg.name.empty() ? stem_of(cfg.input) : cfg.name;
  const auto normalized = pointcloud::normalize_cloud(cloud);
  const auto coarse = fit_coarse(cfg, normalized, stem, layout);
  const auto path = layout.normals() / (stem + ".coarse.normals");
  pointcloud::save_normals(coarse.vectors, path);
  out << "checkpoint = " << (layout.checkpoints() / (stem + ".ngl.ckpt")).string() << "\n"
      << "normals = " << path.string() << "\n";
  if (cloud.has_normals()) {
    out << "orientation_consistency = "
        << eval::format_double(orientation_consistency(coarse.vectors, cloud.normals())) << "\n";
  }
  return kOk;
}

int cmd_train_gvo(const RunConfig& cfg, std::ostream& out) {
  std::vector<PointCloud> dataset;
  if (cfg.inputs.empty()) {
    const pointcloud::ShapeKind kinds[] = {pointcloud::ShapeKind::sphere, pointcloud::ShapeKind::cube,
                                           pointcloud::ShapeKind::torus};
    for (std::size_t k = 0; k < 3; ++k) {
      dataset.push_back(pointcloud::normalize_cloud(
          pointcloud::synth_shape(kinds[k], cfg.corpus_n, derive_seed(cfg.seed, 100 + k))));
    }
  } else {
    for (const auto& p : cfg.inputs) {
      if (!fs::exists(p)) throw IoError("input file not found: " + p);
      auto cloud = pointcloud::load_cloud(p);
      if (!cloud.has_normals()) throw InvalidArgument("training cloud has no normals: " + p);
      dataset.push_back(pointcloud::normalize_cloud(cloud));
    }
  }
  const auto layout = prepare(cfg, "train-gvo");
  const std::string name = cfg.name.empty() ? "gvo" : cfg.name;

  const auto result = gvo::train_gvo(dataset, cfg.gvo, cfg.seed, [](std::size_t epoch, double loss) {
    spdlog::info("gvo epoch {} loss {:.6f}", epoch, loss);
  });
  auto net = result.net;
  const auto ckpt = layout.checkpoints() / (name + ".gvo.ckpt");
  gvo::save_gvo(ckpt, net);

  auto log = open_output(layout.logs() / (name + ".gvo.csv"));
  log << "epoch,loss,score_loss,angle_loss,wall_ms\n";
  const auto& l = result.log;
  for (std::size_t e = 0; e < l.epoch_loss.size(); ++e) {
    log << e << ',' << eval::format_double(l.epoch_loss[e]) << ','
        << eval::format_double(l.epoch_score[e]) << ',' << eval::format_double(l.epoch_angle[e])
        << ',' << eval::format_double(l.wall_ms[e]) << '\n';
  }
  out << "checkpoint = " << ckpt.string() << "\n"
      << "initial_loss = " << eval::format_double(l.epoch_loss.front()) << "\n"
      << "final_loss = " << eval::format_double(l.epoch_loss.back()) << "\n";
  return kOk;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
  const auto cloud = load_input(cfg);
  if (cfg.stage == "refined" && cfg.gvo_checkpoint.empty()) {
    throw InvalidArgument("--stage refined needs --gvo-checkpoint");
  }
  const auto layout = prepare(cfg, "estimate");
  const std::string stem = cfg.name.empty() ? stem_of(cfg.input) : cfg.name;
  const auto normalized = pointcloud::normalize_cloud(cloud);

  NormalField field;
  if (!cfg.ngl_checkpoint.empty()) {
    const auto net = nn::load_mlp(cfg.ngl_checkpoint);
    field = ngl::extract_gradients(net, normalized).field;
  } else {
    field = fit_coarse(cfg, normalized, stem, layout);
  }
  if (cfg.stage == "refined") {
    const auto net = gvo::load_gvo(cfg.gvo_checkpoint);
    auto gcfg = cfg.gvo;
    gcfg.shape = net.shape();
    field = gvo::refine_field(net, normalized, field, gcfg, derive_seed(cfg.seed, 2));
  }

  const std::string stage(to_string(field.stage));
  const auto path = layout.normals() / (stem + "." + stage + ".normals");
  pointcloud::save_normals(field.vectors, path);
  out << "normals = " << path.string() << "\n"
      << "count = " << field.vectors.size() << "\n";
  if (cfg.ply) {
    pointcloud::PlyWriteOptions opts;
    opts.normals = &field.vectors;
    const auto ply = layout.normals() / (stem + "." + stage + ".ply");
    pointcloud::save_ply(cloud.points(), ply, opts);
    out << "ply = " << ply.string() << "\n";
  }
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const auto cloud = load_input(cfg);
  std::vector<Vec3> gt;
  if (!cfg.gt.empty()) {
    if (!fs::exists(cfg.gt)) throw IoError("ground-truth file not found: " + cfg.gt);
    gt = pointcloud::load_normals(cfg.gt);
  } else if (cloud.has_normals()) {
    gt = cloud.normals();
  } else {
    throw InvalidArgument("no ground-truth normals: pass --gt or provide a .normals sidecar");
  }
  if (gt.size() != cloud.size()) throw InvalidArgument("ground truth count does not match the cloud");

  NormalField field;
  std::string label;
  if (cfg.baseline == "none") {
    if (cfg.pred.empty()) throw InvalidArgument("--pred or --baseline is required");
    if (!fs::exists(cfg.pred)) throw IoError("prediction file not found: " + cfg.pred);
    field.vectors = pointcloud::load_normals(cfg.pred);
    if (field.vectors.size() != cloud.size()) {
      throw InvalidArgument("prediction count does not match the cloud");
    }
    label = stem_of(cfg.pred);
    const auto dot = label.rfind('.');
    const std::string suffix = dot == std::string::npos ? "" : label.substr(dot + 1);
    field.stage = suffix == "refined" ? FieldStage::refined : FieldStage::coarse;
  } else {
    const auto normalized = pointcloud::normalize_cloud(cloud.without_normals());
    field = eval::pca_normals(normalized, cfg.pca_k);
    if (cfg.baseline == "pca+mst") field = eval::mst_orient(normalized, field, {cfg.mst_k});
    label = stem_of(cfg.input) + "." + (cfg.baseline == "pca" ? "pca" : "pca_mst");
  }
  if (!cfg.name.empty()) label = cfg.name;

  const auto layout = prepare(cfg, "evaluate");
  const std::string stage = cfg.baseline == "none" ? std::string(to_string(field.stage)) : cfg.baseline;
  const auto report = eval::evaluate_field(field, gt, stem_of(cfg.input), cfg.noise, stage);
  const auto base = layout.reports() / label;
  eval::write_report(report, base.string() + ".report.txt");
  eval::write_pgp_csv(report.thresholds, report.oriented_pgp, base.string() + ".pgp_oriented.csv");
  eval::write_pgp_csv(report.thresholds, report.unoriented_pgp, base.string() + ".pgp_unoriented.csv");
  eval::export_error_map(cloud, report.oriented_errors, base.string() + ".errors.ply");

  out << "report = " << base.string() << ".report.txt\n"
      << "oriented_rmse = " << eval::format_double(report.oriented_rmse) << "\n"
      << "unoriented_rmse = " << eval::format_double(report.unoriented_rmse) << "\n";

  if (cfg.flip_table) {
    const auto sweep = eval::flip_rule_sweep();
    auto csv = open_output(layout.reports() / "flip_rule.csv");
    csv << "n1_x,n1_y,n1_z,n2_x,n2_y,n2_z,gt2_x,gt2_y,gt2_z,flipped,correct\n";
    for (std::size_t i = 0; i < sweep.cases.size(); ++i) {
      const auto& c = sweep.cases[i];
      for (const Vec3* v : {&c.n1, &c.n2, &c.gt2})
        for (int a = 0; a < 3; ++a) csv << eval::format_double((*v)[a]) << ',';
      csv << sweep.verdicts[i].flipped << ',' << sweep.verdicts[i].correct << '\n';
    }
    write_text(layout.reports() / "flip_rule.txt",
               "cases = " + std::to_string(sweep.cases.size()) + "\nfailures = " +
                   std::to_string(sweep.failures) +
                   "\nfailure_rate = " + eval::format_double(sweep.failure_rate) + "\n");
    out << "flip_rule_failures = " << sweep.failures << " / " << sweep.cases.size() << "\n";
  }
  return kOk;
}

namespace {

// Flag -> config key. Values are recorded as text and replayed through
// RunConfig::set after the config file.
class Bindings {
 public:
  void option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = values_.emplace_back();
    entries_.push_back({app->add_option(flag, slot, help), key, &slot, false});
  }
  void flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = values_.emplace_back();
    entries_.push_back({app->add_flag(flag, help), key, &slot, true});
  }

  std::vector<KeyValue> given() const {
    std::vector<KeyValue> out;
    for (const auto& e : entries_) {
      if (e.opt->count() == 0) continue;
      out.push_back({e.key, e.is_flag ? "true" : *e.value});
    }
    return out;
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::string* value;
    bool is_flag;
  };
  std::deque<std::string> values_;
  std::vector<Entry> entries_;
};

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::string> ablate;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* sub, Bindings& b, Common& c) {
  sub->add_option("--config", c.config, "key = value config file");
  sub->add_option("--set", c.sets, "extra key=value settings")->take_all();
  b.option(sub, "--seed", "seed", "random seed (falls back to NF_SEED)");
  b.option(sub, "--threads", "threads", "worker thread cap");
  b.option(sub, "--outdir", "outdir", "output directory");
  b.option(sub, "--preset", "preset", "desk | full");
  b.option(sub, "--name", "name", "output file stem");
}

void add_ngl_options(CLI::App* sub, Bindings& b) {
  b.option(sub, "--loss", "ngl.loss", "eq6 | eq8 | eq4");
  b.option(sub, "--distance", "ngl.distance", "l2 | l1 | mse");
  b.option(sub, "--k", "ngl.k", "neighbors averaged per query");
  b.option(sub, "--iterations", "ngl.iterations", "training iterations");
  b.option(sub, "--batch", "ngl.batch", "queries per iteration");
  b.option(sub, "--width", "ngl.width", "hidden width");
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config file " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"nfield: oriented normal estimation for point clouds"};
  app.require_subcommand(1);
  Bindings b;
  Common c;

  auto* synth = app.add_subcommand("synth", "write a synthetic cloud and its normals");
  add_common(synth, b, c);
  b.option(synth, "--kind", "kind", "sphere | cube | torus");
  b.option(synth, "--n", "n", "number of points");
  b.option(synth, "--noise", "noise", "Gaussian noise std as a fraction of the bbox diagonal");
  b.option(synth, "--density", "density", "none | gradient");

  auto* fit = app.add_subcommand("fit-ngl", "fit the neural field and export coarse normals");
  add_common(fit, b, c);
  b.option(fit, "--input", "input", "point cloud");
  add_ngl_options(fit, b);

  auto* train = app.add_subcommand("train-gvo", "train the refinement network");
  add_common(train, b, c);
  train->add_option("--inputs", c.inputs, "training clouds with normals (default: synthetic corpus)");
  b.option(train, "--corpus-n", "corpus_n", "points per synthetic training shape");
  b.option(train, "--epochs", "gvo.epochs", "training epochs");
  b.option(train, "--patches-per-shape", "gvo.patches_per_shape", "patches per shape per epoch");
  b.option(train, "--lambda", "gvo.lambda", "angle loss weight");
  train->add_option("--ablate", c.ablate, "no-score | no-kernel-weight")
      ->check(CLI::IsMember({"no-score", "no-kernel-weight"}));

  auto* est = app.add_subcommand("estimate", "coarse and refined normals for a cloud");
  add_common(est, b, c);
  b.option(est, "--input", "input", "point cloud");
  b.option(est, "--stage", "stage", "coarse | refined");
  b.option(est, "--ngl-checkpoint", "ngl_checkpoint", "reuse a fitted field");
  b.option(est, "--gvo-checkpoint", "gvo_checkpoint", "trained refinement network");
  b.option(est, "--eta", "gvo.eta", "candidate spread");
  b.option(est, "--test-vectors", "gvo.test_vectors", "candidates per point");
  b.flag(est, "--filter-hemisphere", "gvo.filter_hemisphere", "drop candidates facing away from v0");
  b.flag(est, "--ply", "ply", "also write a PLY with normals");
  add_ngl_options(est, b);

  auto* evaluate = app.add_subcommand("evaluate", "angle errors, RMSE and PGP against ground truth");
  add_common(evaluate, b, c);
  b.option(evaluate, "--input", "input", "point cloud");
  b.option(evaluate, "--gt", "gt", "ground-truth .normals (default: sidecar)");
  b.option(evaluate, "--pred", "pred", "predicted .normals");
  b.option(evaluate, "--baseline", "baseline", "pca | pca+mst");
  b.option(evaluate, "--pca-k", "pca_k", "PCA neighborhood size");
  b.option(evaluate, "--mst-k", "mst_k", "MST graph degree");
  b.option(evaluate, "--noise", "noise", "noise level recorded in the report");
  b.flag(evaluate, "--flip-table", "flip_table", "write the sign-propagation failure table");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    RunConfig cfg;
    std::vector<KeyValue> settings;
    if (!c.config.empty()) settings = parse_config_text(read_file(c.config));
    for (const auto& s : c.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + s + "'");
      settings.push_back({s.substr(0, eq), s.substr(eq + 1)});
    }
    for (auto& kv : b.given()) settings.push_back(std::move(kv));
    if (!c.inputs.empty()) {
      std::string joined;
      for (const auto& p : c.inputs) joined += (joined.empty() ? "" : ",") + p;
      settings.push_back({"inputs", joined});
    }
    for (const auto& a : c.ablate) {
      settings.push_back({a == "no-score" ? "gvo.use_score" : "gvo.use_kernel_weight", "false"});
    }
    apply_settings(cfg, settings);
    if (!cfg.seed_given) {
      if (const char* env = std::getenv("NF_SEED"); env && *env) cfg.set("seed", env);
    }
    cfg.validate();
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);

    const std::string name = active->get_name();
    if (name == "synth") return cmd_synth(cfg, out);
    if (name == "fit-ngl") return cmd_fit_ngl(cfg, out);
    if (name == "train-gvo") return cmd_train_gvo(cfg, out);
    if (name == "estimate") return cmd_estimate(cfg, out);
    return cmd_evaluate(cfg, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  }
}

}  // namespace nf::cli
