#include "mal/metrics.hpp"

#include <cmath>
#include <string>

#include "mal/errors.hpp"

namespace mal {

namespace {

void check_same(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw DimensionMismatch("masks differ in shape");
}

struct Overlap {
  std::size_t inter = 0;
  std::size_t a = 0;
  std::size_t b = 0;
};

Overlap overlap(const BinaryMask& a, const BinaryMask& b) {
  check_same(a, b);
  Overlap o;
  for (std::size_t i = 0; i < a.size(); ++i) {
    o.a += a[i];
    o.b += b[i];
    o.inter += a[i] && b[i];
  }
  return o;
}

}  // namespace

ClusterAssignment assignment_from_mask(const BinaryMask& mask, int grid_w, int grid_h) {
  if (grid_w < 1 || grid_h < 1 || grid_w > mask.width() || grid_h > mask.height()) {
    throw InvalidArgument("token grid must be non-empty and no finer than the mask");
  }
  ClusterAssignment out{grid_w, grid_h, std::vector<std::uint8_t>(static_cast<std::size_t>(grid_w) * grid_h)};
  for (int ty = 0; ty < grid_h; ++ty) {
    const int y0 = ty * mask.height() / grid_h;
    const int y1 = (ty + 1) * mask.height() / grid_h;
    for (int tx = 0; tx < grid_w; ++tx) {
      const int x0 = tx * mask.width() / grid_w;
      const int x1 = (tx + 1) * mask.width() / grid_w;
      std::size_t on = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) on += mask.at(x, y);
      }
      const std::size_t cells = static_cast<std::size_t>(x1 - x0) * (y1 - y0);
      out.foreground[static_cast<std::size_t>(ty) * grid_w + tx] = 2 * on > cells ? 1 : 0;
    }
  }
  return out;
}

double clustering_score(const FeatureField& f, const ClusterAssignment& assign) {
  if (f.dim < 1 || f.data.size() != f.token_count() * static_cast<std::size_t>(f.dim)) {
    throw DimensionMismatch("feature field data does not match its dimensions");
  }
  if (assign.width != f.width || assign.height != f.height || assign.foreground.size() != f.token_count()) {
    throw DimensionMismatch("assignment grid does not match the feature grid");
  }
  const std::size_t n = f.token_count();
  const auto dim = static_cast<std::size_t>(f.dim);
  std::vector<double> center[2] = {std::vector<double>(dim), std::vector<double>(dim)};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const int g = assign.foreground[i] ? 1 : 0;
    ++count[g];
    for (std::size_t d = 0; d < dim; ++d) center[g][d] += f.token(i)[d];
  }
  if (count[0] == 0 || count[1] == 0) throw InvalidArgument("clustering needs foreground and background tokens");
  double center_norm[2];
  for (int g = 0; g < 2; ++g) {
    double s = 0.0;
    for (auto& v : center[g]) {
      v /= static_cast<double>(count[g]);
      s += v * v;
    }
    center_norm[g] = std::sqrt(s);
    if (center_norm[g] == 0.0) throw NormalizationError("cluster centre has zero norm");
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* t = f.token(i);
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += t[d] * t[d];
    const double norm = std::sqrt(s);
    if (norm == 0.0) throw NormalizationError("feature vector with zero norm at token " + std::to_string(i));
    const int g = assign.foreground[i] ? 1 : 0;
    double dist = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = t[d] / norm - center[g][d] / center_norm[g];
      dist += diff * diff;
    }
    total += dist;
  }
  return total / static_cast<double>(n);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const Overlap o = overlap(a, b);
  const std::size_t uni = o.a + o.b - o.inter;
  return uni == 0 ? 1.0 : static_cast<double>(o.inter) / static_cast<double>(uni);
}

double mask_dice(const BinaryMask& a, const BinaryMask& b) {
  const Overlap o = overlap(a, b);
  return o.a + o.b == 0 ? 1.0 : 2.0 * static_cast<double>(o.inter) / static_cast<double>(o.a + o.b);
}

double retention(double box_sup_ap, double full_sup_ap) {
  if (!(full_sup_ap > 0.0)) throw InvalidArgument("supervised AP must be > 0");
  return 100.0 * box_sup_ap / full_sup_ap;
}

double foreground_fraction(const BinaryMask& mask, const BBox& box) {
  std::size_t on = 0;
  std::size_t total = 0;
  for (int y = 0; y < mask.height(); ++y) {
    if (!(y < box.y1 && y + 1 > box.y0)) continue;
    for (int x = 0; x < mask.width(); ++x) {
      if (!(x < box.x1 && x + 1 > box.x0)) continue;
      ++total;
      on += mask.at(x, y);
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(on) / static_cast<double>(total);
}

}  // namespace mal
