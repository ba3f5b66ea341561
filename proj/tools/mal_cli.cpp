// mal: batch mask auto-labelling from boxes.
//
// Exit codes: 0 success, 1 a per-item failure, 2 bad arguments or config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mal/config.hpp"
#include "mal/errors.hpp"
#include "mal/io.hpp"
#include "mal/metrics.hpp"
#include "mal/parallel.hpp"
#include "mal/pipeline.hpp"
#include "mal/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kItemFailure = 1;
constexpr int kConfigError = 2;

struct Args {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;

  // label
  std::string annotations;
  std::string out_dir;

  // refine
  std::string image;
  std::string mask;
  std::string out_prob;
  std::string out_binary;

  // synth
  int count = 10;
  int size = 64;
  std::string shape = "random";
  double sigma = 0.05;
  std::string image_format = "malf";

  // metrics
  std::string mask_a;
  std::string mask_b;
  std::string features;
  std::string gt;

  // check-grad
  int instances = 100;
  std::string broken = "none";

  // bench
  std::vector<int> sizes{128, 256, 512};
  int repeats = 3;
  std::string mask_dir;

  // config init
  std::string config_out;
  bool force = false;
};

mal::RunConfig effective_config(const Args& a) {
  mal::RunConfig cfg = a.config_path.empty() ? mal::RunConfig{} : mal::load_config(a.config_path);
  if (a.seed_set) cfg.seed = a.seed;
  cfg.threads = mal::threads_from_env(cfg.threads);
  return cfg;
}

void print_json(const ordered_json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_label(const Args& a) {
  const mal::RunConfig cfg = effective_config(a);
  const auto items = mal::load_annotations(a.annotations);
  const fs::path out = a.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(a.out_dir);
  const mal::LabelReport r = mal::run_label(items, cfg, out, cfg.threads);
  std::cerr << "labelled " << r.summary["succeeded"].get<std::size_t>() << " of " << r.summary["count"].get<std::size_t>()
            << " boxes into " << out.string() << '\n';
  for (const auto& e : r.summary["items"]) {
    if (e["status"] != "ok") std::cerr << "error: " << e["image_path"].get<std::string>() << ": " << e["error"].get<std::string>() << '\n';
  }
  return r.failed == 0 ? kOk : kItemFailure;
}

int cmd_refine(const Args& a) {
  mal::RunConfig cfg = effective_config(a);
  cfg.crf.threads = cfg.threads;
  const mal::Image img = mal::io::load_image(a.image);
  const mal::ProbMask m = mal::io::load_mask(a.mask);
  const mal::PairwiseKernel kernel = mal::build_kernel(img, cfg.crf);
  const mal::MeanFieldResult r = mal::mean_field(m, kernel, cfg.crf);
  const mal::BinaryMask bits = mal::threshold(r.refined, cfg.crf);
  mal::io::save_mask(a.out_prob, r.refined);
  mal::io::save_binary(a.out_binary, bits);
  ordered_json j;
  j["iterations"] = r.iters_used;
  j["foreground_pixels"] = bits.count();
  j["refined"] = a.out_prob;
  j["mask"] = a.out_binary;
  print_json(j);
  return kOk;
}

int cmd_synth(const Args& a) {
  if (a.count < 0) throw mal::ConfigError("--count must be >= 0");
  if (a.image_format != "malf" && a.image_format != "png") throw mal::ConfigError("--image-format must be malf or png");
  std::optional<mal::synth::Shape> fixed;
  if (a.shape != "random") {
    try {
      fixed = mal::synth::shape_from_string(a.shape);
    } catch (const mal::InvalidArgument& e) {
      throw mal::ConfigError(e.what());
    }
  }
  const fs::path out = a.out_dir.empty() ? fs::path("synth") : fs::path(a.out_dir);
  fs::create_directories(out);
  ordered_json annotations = ordered_json::array();
  for (int i = 0; i < a.count; ++i) {
    mal::synth::SceneSpec spec = mal::synth::random_spec(a.seed + static_cast<std::uint64_t>(i), a.size, a.sigma);
    if (fixed) spec.shape = *fixed;
    const mal::synth::Scene scene = mal::synth::generate(spec);
    char stem[32];
    std::snprintf(stem, sizeof stem, "scene_%04d", i);
    const std::string image_file = std::string(stem) + "." + a.image_format;
    const std::string mask_file = std::string(stem) + ".gt.png";
    mal::io::save_image(out / image_file, scene.image);
    mal::io::save_binary(out / mask_file, scene.mask);
    ordered_json e;
    e["image_path"] = image_file;
    e["boxes"] = ordered_json::array({ordered_json::array({scene.box.x0, scene.box.y0, scene.box.x1, scene.box.y1})});
    e["ids"] = ordered_json::array({stem});
    e["gt_mask"] = mask_file;
    annotations.push_back(std::move(e));
  }
  std::ofstream(out / "annotations.json") << annotations.dump(2) << '\n';
  std::cerr << "wrote " << a.count << " scenes to " << out.string() << '\n';
  return kOk;
}

int cmd_metrics(const Args& a) {
  ordered_json j;
  if (!a.mask_a.empty() || !a.mask_b.empty()) {
    if (a.mask_a.empty() || a.mask_b.empty()) throw mal::ConfigError("--a and --b must be given together");
    const mal::BinaryMask ma = mal::io::load_binary(a.mask_a);
    const mal::BinaryMask mb = mal::io::load_binary(a.mask_b);
    j["iou"] = mal::mask_iou(ma, mb);
    j["dice"] = mal::mask_dice(ma, mb);
  }
  if (!a.features.empty()) {
    if (a.gt.empty()) throw mal::ConfigError("--features needs --gt");
    const mal::io::RawTensor t = mal::io::read_malf(a.features);
    mal::FeatureField f{static_cast<int>(t.width), static_cast<int>(t.height), static_cast<int>(t.channels),
                        std::vector<double>(t.values.begin(), t.values.end())};
    const mal::BinaryMask gt = mal::io::load_binary(a.gt);
    j["clustering_score"] = mal::clustering_score(f, mal::assignment_from_mask(gt, f.width, f.height));
  }
  if (j.empty()) throw mal::ConfigError("metrics needs --a/--b and/or --features/--gt");
  print_json(j);
  return kOk;
}

int cmd_check_grad(const Args& a) {
  mal::GradCheckOptions o;
  o.seed = a.seed;
  o.instances = a.instances;
  if (a.broken == "mil") {
    o.broken = mal::BrokenGradient::kMil;
  } else if (a.broken == "crf") {
    o.broken = mal::BrokenGradient::kCrf;
  } else if (a.broken == "total") {
    o.broken = mal::BrokenGradient::kTotal;
  } else if (a.broken != "none") {
    throw mal::ConfigError("--break must be none, mil, crf or total");
  }
  if (o.instances < 1) throw mal::ConfigError("--instances must be >= 1");
  const mal::GradCheckReport r = mal::run_grad_check(o);
  print_json(r.json);
  return r.passed ? kOk : kItemFailure;
}

int cmd_bench(const Args& a) {
  const mal::RunConfig cfg = effective_config(a);
  mal::BenchOptions o;
  o.sizes = a.sizes;
  o.repeats = a.repeats;
  o.seed = cfg.seed;
  o.crf = cfg.crf;
  o.crf.threads = cfg.threads;
  o.mask_dir = a.mask_dir;
  if (o.repeats < 1) throw mal::ConfigError("--repeats must be >= 1");
  for (int s : o.sizes) {
    if (s < 1) throw mal::ConfigError("--sizes entries must be >= 1");
  }
  const mal::BenchReport r = mal::run_bench(o);
  print_json(r.json);
  return kOk;
}

int cmd_config_init(const Args& a) {
  const std::string text = mal::to_json(mal::RunConfig{}).dump(2) + "\n";
  if (a.config_out.empty() || a.config_out == "-") {
    std::cout << text;
    return kOk;
  }
  if (fs::exists(a.config_out) && !a.force) throw mal::ConfigError(a.config_out + " exists; pass --force to overwrite");
  std::ofstream out(a.config_out);
  out << text;
  if (!out) throw mal::IoError("cannot write " + a.config_out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Box-supervised mask auto-labelling"};
  app.require_subcommand(1);
  Args a;

  const auto add_config = [&a](CLI::App* c) {
    c->add_option("-c,--config", a.config_path, "Run configuration JSON")->check(CLI::ExistingFile);
  };
  const auto add_seed = [&a](CLI::App* c) {
    c->add_option_function<std::uint64_t>("--seed", [&a](const std::uint64_t& s) {
      a.seed = s;
      a.seed_set = true;
    }, "Seed (overrides the config)");
  };

  CLI::App* label = app.add_subcommand("label", "Generate masks for every annotated box");
  label->add_option("annotations", a.annotations, "Annotation JSON")->required();
  label->add_option("-o,--out", a.out_dir, "Output directory (default: config output_dir)");
  add_config(label);
  add_seed(label);

  CLI::App* refine = app.add_subcommand("refine", "Mean-field refinement of a soft mask");
  refine->add_option("--image", a.image, "Image (.malf, .png, .pgm)")->required();
  refine->add_option("--mask", a.mask, "Soft mask in [0, 1]")->required();
  refine->add_option("--out-prob", a.out_prob, "Refined soft mask output")->required();
  refine->add_option("--out-mask", a.out_binary, "Thresholded mask output")->required();
  add_config(refine);

  CLI::App* synth = app.add_subcommand("synth", "Write seeded synthetic scenes with ground truth");
  synth->add_option("-o,--out", a.out_dir, "Output directory")->required();
  synth->add_option("-n,--count", a.count, "Number of scenes");
  synth->add_option("--size", a.size, "Scene width and height")->check(CLI::PositiveNumber);
  synth->add_option("--shape", a.shape, "rect, ellipse, l-shape or random");
  synth->add_option("--sigma", a.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  synth->add_option("--image-format", a.image_format, "malf (lossless) or png");
  add_seed(synth);

  CLI::App* metrics = app.add_subcommand("metrics", "IoU, dice and clustering score");
  metrics->add_option("--a", a.mask_a, "First binary mask");
  metrics->add_option("--b", a.mask_b, "Second binary mask");
  metrics->add_option("--features", a.features, "Token features (.malf, channels = feature dim)");
  metrics->add_option("--gt", a.gt, "Ground-truth mask for the clustering score");

  CLI::App* check = app.add_subcommand("check-grad", "Finite-difference gradient check");
  check->add_option("--instances", a.instances, "Random instances per suite");
  check->add_option("--break", a.broken, "Test hook: corrupt the mil, crf or total gradient");
  add_seed(check);

  CLI::App* bench = app.add_subcommand("bench", "Mean-field and loss throughput");
  bench->add_option("--sizes", a.sizes, "Square image sizes")->delimiter(',');
  bench->add_option("--repeats", a.repeats, "Timed repetitions per size");
  bench->add_option("--mask-dir", a.mask_dir, "Write refined masks here");
  add_config(bench);
  add_seed(bench);

  CLI::App* config = app.add_subcommand("config", "Configuration helpers");
  config->require_subcommand(1);
  CLI::App* init = config->add_subcommand("init", "Print or write the default configuration");
  init->add_option("-o,--out", a.config_out, "Output file (default: stdout)");
  init->add_flag("--force", a.force, "Overwrite an existing file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*label) return cmd_label(a);
    if (*refine) return cmd_refine(a);
    if (*synth) return cmd_synth(a);
    if (*metrics) return cmd_metrics(a);
    if (*check) return cmd_check_grad(a);
    if (*bench) return cmd_bench(a);
    if (*init) return cmd_config_init(a);
  } catch (const mal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kItemFailure;
  }
  return kOk;
}
