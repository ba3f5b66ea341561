#include "mal/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mal/errors.hpp"
#include "mal/io.hpp"
#include "mal/metrics.hpp"
#include "mal/mil.hpp"
#include "mal/parallel.hpp"
#include "mal/synth.hpp"

namespace mal {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ConfigError("annotation ids must be strings or integers");
}

std::string resolve(const std::string& p, const fs::path& base) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path.string() : (base / path).string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

ordered_json box_json(const BBox& b) { return ordered_json::array({b.x0, b.y0, b.x1, b.y1}); }

std::string loss_csv(const std::vector<LossRecord>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "step,mil,crf,total\n";
  for (const auto& r : trace) os << r.step << ',' << r.mil << ',' << r.crf << ',' << r.total << '\n';
  return os.str();
}

ordered_json loss_json(const LossRecord& r) {
  ordered_json j;
  j["mil"] = r.mil;
  j["crf"] = r.crf;
  j["total"] = r.total;
  return j;
}

}  // namespace

std::vector<AnnotationItem> parse_annotations(const json& j, const fs::path& base_dir) {
  if (!j.is_array()) throw ConfigError("annotation file must hold a JSON list");
  std::vector<AnnotationItem> items;
  std::set<std::string> seen;
  std::size_t box_index = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string where = "annotation " + std::to_string(i);
    if (!e.is_object()) throw ConfigError(where + " is not an object");
    for (const auto& [key, _] : e.items()) {
      if (key != "image_path" && key != "boxes" && key != "ids" && key != "gt_mask") {
        throw ConfigError(where + ": unknown key '" + key + "'");
      }
    }
    if (!e.contains("image_path") || !e["image_path"].is_string()) {
      throw ConfigError(where + ": image_path must be a string");
    }
    AnnotationItem item;
    item.image_path = resolve(e["image_path"].get<std::string>(), base_dir);
    const json boxes = e.value("boxes", json::array());
    if (!boxes.is_array()) throw ConfigError(where + ": boxes must be a list");
    for (const auto& b : boxes) {
      if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const json& v) {
            return v.is_number();
          })) {
        throw ConfigError(where + ": each box must be [x0, y0, x1, y1]");
      }
      const BBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      if (!box.valid()) throw ConfigError(where + ": box must have x0 < x1 and y0 < y1");
      item.boxes.push_back(box);
    }
    if (e.contains("ids")) {
      if (!e["ids"].is_array() || e["ids"].size() != item.boxes.size()) {
        throw ConfigError(where + ": ids must be a list with one entry per box");
      }
      for (const auto& v : e["ids"]) item.ids.push_back(id_string(v));
    } else {
      for (std::size_t k = 0; k < item.boxes.size(); ++k) item.ids.push_back("box" + std::to_string(box_index + k));
    }
    if (e.contains("gt_mask")) {
      const json& g = e["gt_mask"];
      if (g.is_string()) {
        item.gt_masks.assign(item.boxes.size(), resolve(g.get<std::string>(), base_dir));
      } else if (g.is_array() && g.size() == item.boxes.size() &&
                 std::all_of(g.begin(), g.end(), [](const json& v) { return v.is_string(); })) {
        for (const auto& v : g) item.gt_masks.push_back(resolve(v.get<std::string>(), base_dir));
      } else {
        throw ConfigError(where + ": gt_mask must be a path or one path per box");
      }
    }
    for (const auto& id : item.ids) {
      if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..") {
        throw ConfigError(where + ": id '" + id + "' is not usable as a file name");
      }
      if (!seen.insert(id).second) throw ConfigError(where + ": duplicate id '" + id + "'");
    }
    box_index += item.boxes.size();
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<AnnotationItem> load_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open annotation file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("annotation file " + path.string() + ": " + e.what());
  }
  return parse_annotations(j, path.parent_path());
}

BinaryMask gt_in_crop(const BinaryMask& gt, const CropGeometry& g) {
  BinaryMask cut = crop(gt, g.source);
  if (cut.width() == g.crop_w && cut.height() == g.crop_h) return cut;
  return resize_mask(cut, g.crop_w, g.crop_h);
}

BoxResult label_box(const Image& img, const BBox& box, const RunConfig& cfg, CounterRng rng, const BinaryMask* gt) {
  if (!box.valid()) throw DegenerateBoxError("box has zero area");
  if (gt && (gt->width() != img.width() || gt->height() != img.height())) {
    throw DimensionMismatch("ground-truth mask and image differ in size");
  }
  CounterRng expand_rng = rng.split(0);
  CounterRng init_rng = rng.split(1);
  RoiSample roi = make_crop_geometry(box, img, cfg.expansion, cfg.crop_width, cfg.crop_height, expand_rng);
  OptimizeResult opt = optimize_logits(roi.input, roi.geometry, cfg.weights, cfg.crf, cfg.logit, init_rng);

  BoxResult out;
  out.geometry = roi.geometry;
  out.mask = threshold(opt.refined, cfg.crf);
  out.refined = std::move(opt.refined);
  out.trace = std::move(opt.trace);
  if (gt) out.iou = mask_iou(out.mask, gt_in_crop(*gt, out.geometry));
  return out;
}

ordered_json geometry_json(const BBox& box, const CropGeometry& g) {
  ordered_json j;
  j["box"] = box_json(box);
  j["expanded_box"] = box_json(g.expanded.box);
  j["clipped"] = g.expanded.clipped;
  j["theta_x"] = g.expanded.theta_x;
  j["theta_y"] = g.expanded.theta_y;
  j["beta_x"] = g.expanded.beta_x;
  j["beta_x_prime"] = g.expanded.beta_x_prime;
  j["beta_y"] = g.expanded.beta_y;
  j["beta_y_prime"] = g.expanded.beta_y_prime;
  j["source_rect"] = ordered_json::array({g.source.x0, g.source.y0, g.source.x1, g.source.y1});
  j["crop_size"] = ordered_json::array({g.crop_w, g.crop_h});
  j["scale"] = ordered_json::array({g.scale_x(), g.scale_y()});
  j["box_in_crop"] = box_json(g.gt_box_in_crop);
  // image = source_rect origin + crop / scale
  j["crop_to_image"] = ordered_json::array({1.0 / g.scale_x(), 0.0, static_cast<double>(g.source.x0), 0.0,
                                            1.0 / g.scale_y(), static_cast<double>(g.source.y0)});
  return j;
}

LabelReport run_label(const std::vector<AnnotationItem>& items, const RunConfig& cfg, const fs::path& out_dir,
                      int threads) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  struct Work {
    std::size_t item = 0;
    std::size_t box = 0;
  };
  std::vector<Work> work;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t k = 0; k < items[i].boxes.size(); ++k) work.push_back({i, k});
  }

  // Images are loaded once up front so that a missing file fails every
  // box that refers to it without racing on the file system.
  std::vector<std::optional<Image>> images(items.size());
  std::vector<std::string> load_errors(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    try {
      images[i] = io::load_image(items[i].image_path);
    } catch (const std::exception& e) {
      load_errors[i] = e.what();
    }
  }

  std::vector<ordered_json> entries(work.size());
  RunConfig box_cfg = cfg;
  box_cfg.crf.threads = 1;
  const CounterRng root(cfg.seed);
  parallel_items(work.size(), threads, [&](std::size_t w) {
    const AnnotationItem& item = items[work[w].item];
    const std::size_t k = work[w].box;
    const std::string& id = item.ids[k];
    ordered_json e;
    e["id"] = id;
    e["image_path"] = item.image_path;
    e["box"] = box_json(item.boxes[k]);
    try {
      if (!images[work[w].item]) throw IoError(load_errors[work[w].item]);
      std::optional<BinaryMask> gt;
      if (!item.gt_masks.empty()) gt = io::load_binary(item.gt_masks[k]);
      BoxResult r = label_box(*images[work[w].item], item.boxes[k], box_cfg, root.split(w), gt ? &*gt : nullptr);

      const std::string mask_file = id + ".mask.png";
      const std::string refined_file = id + ".refined.malf";
      const std::string geometry_file = id + ".geometry.json";
      const std::string trace_file = id + ".loss.csv";
      io::save_binary(out_dir / mask_file, r.mask);
      io::save_mask(out_dir / refined_file, r.refined);
      write_text(out_dir / geometry_file, geometry_json(item.boxes[k], r.geometry).dump(2) + "\n");
      write_text(out_dir / trace_file, loss_csv(r.trace));

      e["status"] = "ok";
      e["mask"] = mask_file;
      e["refined"] = refined_file;
      e["geometry"] = geometry_file;
      e["loss_trace"] = trace_file;
      e["foreground_pixels"] = r.mask.count();
      if (!r.trace.empty()) {
        e["initial_loss"] = loss_json(r.trace.front());
        e["final_loss"] = loss_json(r.trace.back());
      }
      if (r.iou) e["iou"] = *r.iou;
    } catch (const std::exception& ex) {
      e["status"] = "error";
      e["error"] = ex.what();
    }
    entries[w] = std::move(e);
  });

  LabelReport report;
  ordered_json list = ordered_json::array();
  double iou_sum = 0.0;
  std::size_t iou_count = 0;
  for (auto& e : entries) {
    if (e["status"] != "ok") ++report.failed;
    if (e.contains("iou")) {
      iou_sum += e["iou"].get<double>();
      ++iou_count;
    }
    list.push_back(std::move(e));
  }
  // An image without boxes still has to exist.
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].boxes.empty() || load_errors[i].empty()) continue;
    ordered_json e;
    e["id"] = nullptr;
    e["image_path"] = items[i].image_path;
    e["box"] = nullptr;
    e["status"] = "error";
    e["error"] = load_errors[i];
    list.push_back(std::move(e));
    ++report.failed;
  }

  ordered_json& s = report.summary;
  s["count"] = list.size();
  s["succeeded"] = list.size() - report.failed;
  s["failed"] = report.failed;
  s["mean_iou"] = iou_count ? ordered_json(iou_sum / static_cast<double>(iou_count)) : ordered_json(nullptr);
  // The worker count never changes results, so it stays out of the output.
  ordered_json echoed = to_json(cfg);
  echoed.erase("threads");
  s["config"] = std::move(echoed);
  s["items"] = std::move(list);
  write_text(out_dir / "summary.json", s.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// gradient check

namespace {

struct Instance {
  Image img;
  ProbMask m;
  ProbMask m_t;
  ProbMask l;
  BagSet bags;
};

ProbMask random_mask(int w, int h, CounterRng& rng) {
  ProbMask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(0.05, 0.95);
  return m;
}

// The largest two values of every bag differ by at least `gap`, so a step
// of size < gap / 2 never changes which pixel holds the max.
bool bags_well_separated(const ProbMask& m, const BagSet& bags, double gap) {
  for (const auto& bag : bags.bags) {
    double a = -1.0;
    double b = -1.0;
    for (std::size_t i : bag.pixel_indices) {
      if (m[i] > a) {
        b = a;
        a = m[i];
      } else if (m[i] > b) {
        b = m[i];
      }
    }
    if (a - b < gap) return false;
  }
  return true;
}

Instance make_instance(CounterRng& rng, const GradCheckOptions& o) {
  const auto span = static_cast<std::uint64_t>(o.max_size - o.min_size + 1);
  const int w = o.min_size + static_cast<int>(rng.below(span));
  const int h = o.min_size + static_cast<int>(rng.below(span));
  std::vector<float> px(static_cast<std::size_t>(w) * h * 3);
  for (auto& v : px) v = static_cast<float>(rng.uniform());
  // A box with at least one free row on each side leaves negative bags.
  const double x0 = rng.uniform(1.0, 0.4 * w);
  const double y0 = rng.uniform(1.0, 0.4 * h);
  const BBox box{x0, y0, rng.uniform(0.6 * w, w - 1.0), rng.uniform(0.6 * h, h - 1.0)};
  Instance inst{Image(w, h, 3, std::move(px)), {}, {}, {}, build_bags(w, h, box)};
  do {
    inst.m = random_mask(w, h, rng);
  } while (!bags_well_separated(inst.m, inst.bags, 20.0 * o.step));
  inst.m_t = random_mask(w, h, rng);
  inst.l = random_mask(w, h, rng);
  return inst;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

template <typename F>
double max_rel_err(const ProbMask& m, const ProbMask& grad, double h, F&& loss) {
  double worst = 0.0;
  ProbMask probe = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    probe[i] = m[i] + h;
    const double up = loss(probe);
    probe[i] = m[i] - h;
    const double down = loss(probe);
    probe[i] = m[i];
    worst = std::max(worst, rel_err(grad[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

void corrupt(ProbMask& g) { g[0] += 1e-3 + 0.01 * std::abs(g[0]); }

}  // namespace

GradCheckReport run_grad_check(const GradCheckOptions& o) {
  if (o.instances < 1) throw InvalidArgument("gradient check needs at least one instance");
  if (o.min_size < 3 || o.max_size < o.min_size) throw InvalidArgument("instance sizes must satisfy 3 <= min <= max");
  const LossWeights weights;
  const CrfParams crf;
  double worst_mil = 0.0;
  double worst_crf = 0.0;
  double worst_total = 0.0;
  const CounterRng root(o.seed);
  for (int n = 0; n < o.instances; ++n) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(n));
    const Instance inst = make_instance(rng, o);

    LossAndGrad mil = mil_loss(inst.m, inst.bags);
    if (o.broken == BrokenGradient::kMil) corrupt(mil.grad);
    worst_mil = std::max(worst_mil, max_rel_err(inst.m, mil.grad, o.step,
                                                [&](const ProbMask& p) { return mil_loss(p, inst.bags).loss; }));

    LossAndGrad self = crf_self_training_loss(inst.m, inst.l);
    if (o.broken == BrokenGradient::kCrf) corrupt(self.grad);
    worst_crf = std::max(worst_crf, max_rel_err(inst.m, self.grad, o.step, [&](const ProbMask& p) {
                           return crf_self_training_loss(p, inst.l).loss;
                         }));

    // The pseudo-label is a constant of the backward pass, so the
    // reference freezes it at the base point.
    TotalLoss total = total_loss(inst.m, inst.m_t, inst.img, inst.bags, weights, crf);
    if (o.broken == BrokenGradient::kTotal) corrupt(total.grad);
    const ProbMask frozen = total.refined;
    worst_total = std::max(worst_total, max_rel_err(inst.m, total.grad, o.step, [&](const ProbMask& p) {
                             return weights.alpha_mil * mil_loss(p, inst.bags).loss +
                                    weights.alpha_crf * crf_self_training_loss(p, frozen).loss;
                           }));
  }

  GradCheckReport r;
  ordered_json suites = ordered_json::array();
  const auto suite = [&](const char* name, double worst, double tol) {
    ordered_json s;
    s["name"] = name;
    s["max_rel_error"] = worst;
    s["tolerance"] = tol;
    s["passed"] = worst < tol;
    suites.push_back(s);
    return worst < tol;
  };
  const bool ok = suite("mil_loss", worst_mil, o.term_tol) & suite("crf_self_training_loss", worst_crf, o.term_tol) &
                  suite("total_loss", worst_total, o.total_tol);
  r.json["seed"] = o.seed;
  r.json["instances"] = o.instances;
  r.json["step"] = o.step;
  r.json["suites"] = std::move(suites);
  r.json["passed"] = ok;
  r.passed = ok;
  return r;
}

// ---------------------------------------------------------------------------
// bench

std::uint64_t mask_hash(const ProbMask& refined, double cut) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(refined.width()));
  mix(static_cast<std::uint64_t>(refined.height()));
  for (double v : refined.data()) mix(std::bit_cast<std::uint64_t>(v));
  for (double v : refined.data()) mix(v >= cut ? 1 : 0);
  return h;
}

namespace {

struct BenchScene {
  Image img;
  ProbMask m;
  BBox box;
};

BenchScene bench_scene(int size, std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(static_cast<std::uint64_t>(size));
  BenchScene s;
  BinaryMask gt;
  if (size >= 8) {
    synth::SceneSpec spec;
    spec.width = size;
    spec.height = size;
    spec.shape = synth::Shape::kEllipse;
    spec.extent = {0.25 * size, 0.25 * size, 0.75 * size, 0.75 * size};
    spec.seed = seed;
    synth::Scene scene = synth::generate(spec);
    s.img = std::move(scene.image);
    gt = std::move(scene.mask);
    s.box = scene.box;
  } else {
    std::vector<float> px(static_cast<std::size_t>(size) * size * 3);
    for (auto& v : px) v = static_cast<float>(rng.uniform());
    s.img = Image(size, size, 3, std::move(px));
    // Top-left quarter, so sizes above 1 keep background rows and columns.
    const int half = std::max(1, size / 2);
    gt = BinaryMask(size, size);
    for (int y = 0; y < half; ++y) {
      for (int x = 0; x < half; ++x) gt.set(x, y, true);
    }
    s.box = {0.0, 0.0, static_cast<double>(half), static_cast<double>(half)};
  }
  s.m = ProbMask(size, size);
  for (std::size_t i = 0; i < s.m.size(); ++i) s.m[i] = std::clamp((gt[i] ? 0.7 : 0.3) + rng.uniform(-0.25, 0.25), 0.0, 1.0);
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BenchReport run_bench(const BenchOptions& o) {
  if (o.repeats < 1) throw InvalidArgument("bench repeats must be >= 1");
  CrfParams crf = o.crf;
  crf.tol = 0.0;
  crf.validate();
  if (!o.mask_dir.empty()) fs::create_directories(o.mask_dir);

  BenchReport r;
  ordered_json rows = ordered_json::array();
  for (int size : o.sizes) {
    if (size < 1) throw InvalidArgument("bench sizes must be >= 1");
    const BenchScene s = bench_scene(size, o.seed);
    const PairwiseKernel kernel = build_kernel(s.img, crf);
    const double pixels = static_cast<double>(s.m.size());

    MeanFieldResult mf;
    auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < o.repeats; ++k) mf = mean_field(s.m, kernel, crf);
    const double mf_sec = seconds_since(t0) / o.repeats;

    BagOptions bag_opts;
    bag_opts.negative_bags = size > 1;
    const BagSet bags = build_bags(size, size, s.box, bag_opts);
    TotalLoss tl;
    t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < o.repeats; ++k) tl = total_loss(s.m, s.m, kernel, bags, LossWeights{}, crf);
    const double loss_sec = seconds_since(t0) / o.repeats;

    const std::uint64_t hash = mask_hash(mf.refined, crf.threshold);
    if (!o.mask_dir.empty()) {
      io::save_mask(o.mask_dir / ("bench_" + std::to_string(size) + ".refined.malf"), mf.refined);
      io::save_binary(o.mask_dir / ("bench_" + std::to_string(size) + ".mask.png"), threshold(mf.refined, crf));
    }
    ordered_json row;
    row["size"] = size;
    row["mean_field_iters"] = mf.iters_used;
    row["mean_field_seconds"] = mf_sec;
    row["mean_field_pixels_per_second"] = mf_sec > 0.0 ? pixels * mf.iters_used / mf_sec : 0.0;
    row["loss_seconds"] = loss_sec;
    row["loss_pixels_per_second"] = loss_sec > 0.0 ? pixels / loss_sec : 0.0;
    row["loss"] = tl.loss;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    row["mask_hash"] = buf;
    rows.push_back(std::move(row));
  }
  r.json["threads"] = crf.threads;
  r.json["repeats"] = o.repeats;
  r.json["results"] = std::move(rows);
  return r;
}

}  // namespace mal
