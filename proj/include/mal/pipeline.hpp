#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mal/config.hpp"
#include "mal/image.hpp"
#include "mal/roi.hpp"
#include "mal/training.hpp"

namespace mal {

/// One image with its boxes. `gt_masks` is empty or parallel to `boxes`.
struct AnnotationItem {
  std::string image_path;
  std::vector<BBox> boxes;
  std::vector<std::string> ids;
  std::vector<std::string> gt_masks;
};

/// Parses an annotation file: a JSON list of
///   {"image_path": str, "boxes": [[x0, y0, x1, y1], ...],
///    "ids": [str | int, ...], "gt_mask": str | [str, ...]}
/// with ids and gt_mask optional. Relative paths are resolved against
/// `base_dir`. Throws ConfigError on schema violations or duplicate ids.
std::vector<AnnotationItem> parse_annotations(const nlohmann::json& j, const std::filesystem::path& base_dir);
std::vector<AnnotationItem> load_annotations(const std::filesystem::path& path);

struct BoxResult {
  CropGeometry geometry;
  BinaryMask mask;   // thresholded refinement, crop space
  ProbMask refined;  // mean field on the final averaged mask, crop space
  std::vector<LossRecord> trace;
  std::optional<double> iou;
};

/// expand -> crop -> optimize_logits -> mean field -> threshold for one box.
/// `gt`, when given, is a full-image mask compared in crop space.
BoxResult label_box(const Image& img, const BBox& box, const RunConfig& cfg, CounterRng rng,
                    const BinaryMask* gt = nullptr);

/// Ground truth mapped into crop space the same way as the image.
BinaryMask gt_in_crop(const BinaryMask& gt, const CropGeometry& geometry);

struct LabelReport {
  nlohmann::ordered_json summary;
  std::size_t failed = 0;
};

/// Labels every box, writing per box <id>.mask.png, <id>.refined.malf,
/// <id>.geometry.json and <id>.loss.csv into `out_dir`, plus summary.json.
/// Box k (in file order) draws from CounterRng(cfg.seed).split(k), so the
/// output does not depend on `threads`.
LabelReport run_label(const std::vector<AnnotationItem>& items, const RunConfig& cfg,
                      const std::filesystem::path& out_dir, int threads);

nlohmann::ordered_json geometry_json(const BBox& box, const CropGeometry& g);

enum class BrokenGradient { kNone, kMil, kCrf, kTotal };

struct GradCheckOptions {
  std::uint64_t seed = 0;
  int instances = 100;
  int min_size = 6;
  int max_size = 12;
  double step = 1e-4;
  double term_tol = 1e-5;
  double total_tol = 1e-4;
  /// Test hook: corrupts one analytic gradient to prove the check can fail.
  BrokenGradient broken = BrokenGradient::kNone;
};

struct GradCheckReport {
  nlohmann::ordered_json json;
  bool passed = false;
};

/// Central-difference checks of the MIL, self-training and total loss
/// gradients on seeded random instances. Throws InvalidArgument when
/// `instances` < 1.
GradCheckReport run_grad_check(const GradCheckOptions& opts);

struct BenchOptions {
  std::vector<int> sizes{128, 256, 512};
  int repeats = 3;
  std::uint64_t seed = 0;
  CrfParams crf;
  /// Directory for the refined masks; empty to skip writing.
  std::filesystem::path mask_dir;
};

struct BenchReport {
  nlohmann::ordered_json json;
};

/// Times mean_field and total_loss on seeded scenes of each size with a
/// fixed iteration count (tol forced to 0). Each entry carries a hash of
/// the refined mask so runs can be compared across thread counts.
BenchReport run_bench(const BenchOptions& opts);

/// FNV-1a over the refined values and their thresholded bits.
std::uint64_t mask_hash(const ProbMask& refined, double cut);

}  // namespace mal
