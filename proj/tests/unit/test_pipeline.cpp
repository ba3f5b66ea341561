#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "mal/config.hpp"
#include "mal/errors.hpp"
#include "mal/io.hpp"
#include "mal/metrics.hpp"
#include "mal/pipeline.hpp"
#include "mal/synth.hpp"

using namespace mal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("mal_pipeline_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig small_config() {
  RunConfig cfg;
  cfg.crop_width = 32;
  cfg.crop_height = 32;
  cfg.logit.steps = 40;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("config survives a JSON round trip") {
  RunConfig c;
  c.crf.omega = 3.0;
  c.crf.kernel_form = KernelForm::kAbsolute;
  c.crf.update = MeanFieldUpdate::kClamp;
  c.logit.optimizer = Optimizer::kAdam;
  c.logit.bags.negative_bags = false;
  c.seed = 123456789012345ULL;
  c.output_dir = "elsewhere";
  const RunConfig back = config_from_json(json::parse(to_json(c).dump()));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.crf.kernel_form == KernelForm::kAbsolute);
  CHECK(back.seed == c.seed);
}

TEST_CASE("config defaults carry the standard hyperparameters") {
  const auto j = to_json(RunConfig{});
  CHECK(j["alpha_mil"] == 4.0);
  CHECK(j["alpha_crf"] == 0.5);
  CHECK(j["zeta"] == 0.5);
  CHECK(j["omega"] == 2.0);
  CHECK(j["theta"] == 1.2);
  CHECK(j["crop_width"] == 512);
  CHECK(j["ema_momentum"] == 0.996);
  CHECK(config_from_json(json::object()).crf.omega == 2.0);
}

TEST_CASE("config rejects unknown keys, wrong types and bad values") {
  CHECK_THROWS_AS(config_from_json(json{{"omgea", 2.0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"omega", "two"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"zeta", 0.0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"kernel_form", "cubic"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"ema_momentum", 1.5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"steps", -1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/mal.json"), ConfigError);
  TempDir dir("badjson");
  std::ofstream(dir.path / "c.json") << "{ not json";
  CHECK_THROWS_AS(load_config(dir.path / "c.json"), ConfigError);
}

TEST_CASE("annotations parse with defaults and resolve relative paths") {
  const json j = json::parse(R"([
    {"image_path": "a.png", "boxes": [[1, 2, 3, 4], [0, 0, 5, 5]]},
    {"image_path": "/abs/b.malf", "boxes": [[1, 1, 2, 2]], "ids": [7], "gt_mask": "b.gt.png"}
  ])");
  const auto items = parse_annotations(j, "/data");
  REQUIRE(items.size() == 2);
  CHECK(items[0].image_path == "/data/a.png");
  CHECK(items[0].ids == std::vector<std::string>{"box0", "box1"});
  CHECK(items[0].boxes[1] == BBox{0, 0, 5, 5});
  CHECK(items[0].gt_masks.empty());
  CHECK(items[1].image_path == "/abs/b.malf");
  CHECK(items[1].ids == std::vector<std::string>{"7"});
  CHECK(items[1].gt_masks == std::vector<std::string>{"/data/b.gt.png"});
}

TEST_CASE("annotation schema errors") {
  const auto bad = [](const char* text) { return parse_annotations(json::parse(text), "."); };
  CHECK_THROWS_AS(bad(R"({"image_path": "a.png"})"), ConfigError);
  CHECK_THROWS_AS(bad(R"([{"boxes": []}])"), ConfigError);
  CHECK_THROWS_AS(bad(R"([{"image_path": "a.png", "boxes": [[1, 2, 3]]}])"), ConfigError);
  CHECK_THROWS_AS(bad(R"([{"image_path": "a.png", "boxes": [[3, 2, 1, 4]]}])"), ConfigError);
  CHECK_THROWS_AS(bad(R"([{"image_path": "a.png", "boxes": [[1, 2, 3, 4]], "ids": ["x", "y"]}])"), ConfigError);
  CHECK_THROWS_AS(bad(R"([{"image_path": "a.png", "boxes": [[1, 2, 3, 4]], "ids": ["../x"]}])"), ConfigError);
  CHECK_THROWS_AS(bad(R"([{"image_path": "a.png", "boxes": [[1, 2, 3, 4]], "ids": [true]}])"), ConfigError);
  CHECK_THROWS_AS(bad(R"([{"image_path": "a.png", "boxes": [[1, 2, 3, 4]], "colour": 1}])"), ConfigError);
  CHECK_THROWS_AS(bad(R"([{"image_path": "a.png", "boxes": [[1, 2, 3, 4]], "ids": ["x"]},
                          {"image_path": "b.png", "boxes": [[1, 2, 3, 4]], "ids": ["x"]}])"),
                  ConfigError);
  CHECK_THROWS_AS(bad(R"([{"image_path": "a.png", "boxes": [[1, 2, 3, 4]], "gt_mask": [1]}])"), ConfigError);
  CHECK(bad("[]").empty());
}

TEST_CASE("labelling writes every artefact and is reproducible across worker counts") {
  TempDir dir("label");
  std::vector<AnnotationItem> items;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    synth::SceneSpec spec = synth::random_spec(seed, 32);
    spec.distractor_count = 0;
    const synth::Scene scene = synth::generate(spec);
    const std::string stem = "scene" + std::to_string(seed);
    io::save_image(dir.path / (stem + ".malf"), scene.image);
    io::save_binary(dir.path / (stem + ".gt.png"), scene.mask);
    items.push_back({(dir.path / (stem + ".malf")).string(), {scene.box}, {stem}, {(dir.path / (stem + ".gt.png")).string()}});
  }
  items.push_back({(dir.path / "missing.malf").string(), {BBox{1, 1, 4, 4}}, {"missing"}, {}});

  const RunConfig cfg = small_config();
  const LabelReport one = run_label(items, cfg, dir.path / "t1", 1);
  const LabelReport many = run_label(items, cfg, dir.path / "t3", 3);
  CHECK(one.failed == 1);
  CHECK(one.summary["count"] == 4);
  CHECK(one.summary["succeeded"] == 3);
  CHECK(one.summary["items"][3]["status"] == "error");
  CHECK(one.summary["mean_iou"].is_number());
  CHECK_FALSE(one.summary["config"].contains("threads"));
  for (int k = 0; k < 3; ++k) {
    const std::string id = "scene" + std::to_string(k);
    for (const char* ext : {".mask.png", ".refined.malf", ".geometry.json", ".loss.csv"}) {
      REQUIRE(fs::exists(dir.path / "t1" / (id + ext)));
      CHECK(slurp(dir.path / "t1" / (id + ext)) == slurp(dir.path / "t3" / (id + ext)));
    }
    const BinaryMask mask = io::load_binary(dir.path / "t1" / (id + ".mask.png"));
    CHECK(mask.width() == 32);
    const auto& item = one.summary["items"][static_cast<std::size_t>(k)];
    CHECK(item["foreground_pixels"] == mask.count());
    CHECK(item["iou"].get<double>() >= 0.0);
    const std::string csv = slurp(dir.path / "t1" / (id + ".loss.csv"));
    CHECK(csv.rfind("step,mil,crf,total\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);
  }
  CHECK(slurp(dir.path / "t1" / "summary.json") == slurp(dir.path / "t3" / "summary.json"));
}

TEST_CASE("a single box labels the same way through label_box") {
  synth::SceneSpec spec = synth::random_spec(4, 32);
  const synth::Scene scene = synth::generate(spec);
  const RunConfig cfg = small_config();
  const BoxResult a = label_box(scene.image, scene.box, cfg, CounterRng(1), &scene.mask);
  const BoxResult b = label_box(scene.image, scene.box, cfg, CounterRng(1), &scene.mask);
  CHECK(a.mask == b.mask);
  CHECK(a.refined == b.refined);
  REQUIRE(a.iou.has_value());
  CHECK(*a.iou == doctest::Approx(mask_iou(a.mask, gt_in_crop(scene.mask, a.geometry))));
  CHECK(a.trace.size() == 40);
  CHECK_THROWS_AS(label_box(scene.image, BBox{3, 3, 3, 5}, cfg, CounterRng(1)), DegenerateBoxError);
  const BinaryMask wrong(5, 5);
  CHECK_THROWS_AS(label_box(scene.image, scene.box, cfg, CounterRng(1), &wrong), DimensionMismatch);
}

TEST_CASE("geometry JSON records the affine back to the image") {
  const BBox b{2, 2, 6, 6};
  const CropGeometry g = crop_geometry(b, expand_box(b, ExpansionDraws{2.0, 2.0, 1.0, 1.0}), 10, 10, 16, 16);
  const auto j = geometry_json(b, g);
  CHECK(j["crop_to_image"] == json::array({0.5, 0.0, 0.0, 0.0, 0.5, 0.0}));
  CHECK(j["box_in_crop"] == json::array({4.0, 4.0, 12.0, 12.0}));
  CHECK(j["clipped"] == false);
}

TEST_CASE("gradient check passes and catches a corrupted gradient") {
  GradCheckOptions o;
  o.instances = 5;
  const GradCheckReport ok = run_grad_check(o);
  CHECK(ok.passed);
  CHECK(ok.json["suites"].size() == 3);
  for (const auto broken : {BrokenGradient::kMil, BrokenGradient::kCrf, BrokenGradient::kTotal}) {
    o.broken = broken;
    CHECK_FALSE(run_grad_check(o).passed);
  }
  o.instances = 0;
  CHECK_THROWS_AS(run_grad_check(o), InvalidArgument);
}

TEST_CASE("bench handles tiny sizes and hashes deterministically") {
  BenchOptions o;
  o.sizes = {1, 2, 5, 16};
  o.repeats = 1;
  const BenchReport a = run_bench(o);
  REQUIRE(a.json["results"].size() == 4);
  o.crf.threads = 4;
  const BenchReport b = run_bench(o);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.json["results"][i]["mask_hash"] == b.json["results"][i]["mask_hash"]);
    CHECK(a.json["results"][i]["mask_hash"].get<std::string>().size() == 16);
  }
  o.sizes = {0};
  CHECK_THROWS_AS(run_bench(o), InvalidArgument);
}

TEST_CASE("mask hash changes with any value") {
  ProbMask m(3, 3, 0.25);
  const auto h = mask_hash(m, 0.5);
  CHECK(mask_hash(m, 0.5) == h);
  m[4] = std::nextafter(0.25, 1.0);
  CHECK(mask_hash(m, 0.5) != h);
  CHECK(mask_hash(ProbMask(9, 1, 0.25), 0.5) != h);
}
