#include <doctest.h>

#include <cmath>
#include <vector>

#include "mal/errors.hpp"
#include "mal/metrics.hpp"
#include "mal/rng.hpp"

using namespace mal;

namespace {

// Scalar loop over the definition, kept independent of the library code.
double reference_score(const FeatureField& f, const ClusterAssignment& a) {
  const std::size_t n = f.token_count();
  const auto dim = static_cast<std::size_t>(f.dim);
  std::vector<double> fg(dim, 0.0);
  std::vector<double> bg(dim, 0.0);
  double nfg = 0;
  double nbg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = a.foreground[i] ? fg : bg;
    (a.foreground[i] ? nfg : nbg) += 1;
    for (std::size_t d = 0; d < dim; ++d) c[d] += f.data[i * dim + d];
  }
  const auto unit = [](std::vector<double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    for (double& x : v) x /= std::sqrt(s);
    return v;
  };
  for (double& x : fg) x /= nfg;
  for (double& x : bg) x /= nbg;
  const auto ufg = unit(fg);
  const auto ubg = unit(bg);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = unit(std::vector<double>(f.data.begin() + static_cast<std::ptrdiff_t>(i * dim),
                                            f.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim)));
    const auto& c = a.foreground[i] ? ufg : ubg;
    for (std::size_t d = 0; d < dim; ++d) total += (t[d] - c[d]) * (t[d] - c[d]);
  }
  return total / static_cast<double>(n);
}

FeatureField random_field(int w, int h, int dim, CounterRng& rng) {
  FeatureField f{w, h, dim, {}};
  f.data.resize(f.token_count() * static_cast<std::size_t>(dim));
  for (auto& v : f.data) v = rng.normal();
  return f;
}

ClusterAssignment random_assignment(int w, int h, CounterRng& rng) {
  ClusterAssignment a{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  for (auto& g : a.foreground) g = static_cast<std::uint8_t>(rng.below(2));
  a.foreground[0] = 1;
  a.foreground[1] = 0;
  return a;
}

BinaryMask mask_from(int w, int h, std::vector<std::uint8_t> bits) { return BinaryMask(w, h, std::move(bits)); }

}  // namespace

TEST_CASE("identical vectors per group score zero") {
  FeatureField f{2, 2, 3, {1, 2, 3, 1, 2, 3, -4, 0, 1, -4, 0, 1}};
  const ClusterAssignment a{2, 2, {1, 1, 0, 0}};
  CHECK(clustering_score(f, a) == doctest::Approx(0.0));
}

TEST_CASE("two orthogonal foreground tokens and one background token") {
  const FeatureField f{3, 1, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  const ClusterAssignment a{3, 1, {1, 1, 0}};
  // |e1 - (e1 + e2) / sqrt 2|^2 = 2 - sqrt 2 for each foreground token.
  const double expected = 2.0 * (2.0 - std::sqrt(2.0)) / 3.0;
  CHECK(clustering_score(f, a) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(reference_score(f, a) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("the score matches the reference loop on random fields") {
  CounterRng rng(40);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 2 + static_cast<int>(rng.below(8));
    const int h = 1 + static_cast<int>(rng.below(8));
    const int dim = 1 + static_cast<int>(rng.below(16));
    const FeatureField f = random_field(w, h, dim, rng);
    const ClusterAssignment a = random_assignment(w, h, rng);
    double s = 0.0;
    try {
      s = clustering_score(f, a);
    } catch (const NormalizationError&) {
      continue;  // a one-dimensional centre can cancel to zero
    }
    REQUIRE(std::abs(s - reference_score(f, a)) < 1e-10);
    REQUIRE(s >= 0.0);
    REQUIRE(s <= 4.0);
    FeatureField scaled = f;
    for (auto& v : scaled.data) v *= 37.5;
    REQUIRE(clustering_score(scaled, a) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("clustering errors") {
  const ClusterAssignment a{2, 1, {1, 0}};
  CHECK_THROWS_AS(clustering_score(FeatureField{2, 1, 2, {0, 0, 1, 1}}, a), NormalizationError);
  CHECK_THROWS_AS(clustering_score(FeatureField{2, 1, 1, {1, 1}}, ClusterAssignment{2, 1, {1, 1}}),
                  InvalidArgument);
  CHECK_THROWS_AS(clustering_score(FeatureField{2, 1, 2, {1, 0, 0}}, a), DimensionMismatch);
  CHECK_THROWS_AS(clustering_score(FeatureField{2, 1, 1, {1, 1}}, ClusterAssignment{1, 2, {1, 0}}),
                  DimensionMismatch);
  // Opposite foreground vectors average to a zero centre.
  CHECK_THROWS_AS(clustering_score(FeatureField{3, 1, 1, {1, -1, 2}}, ClusterAssignment{3, 1, {1, 1, 0}}),
                  NormalizationError);
}

TEST_CASE("IoU and dice on worked examples") {
  const BinaryMask a = mask_from(4, 1, {1, 1, 0, 0});
  CHECK(mask_iou(a, a) == 1.0);
  CHECK(mask_iou(a, mask_from(4, 1, {0, 0, 1, 1})) == 0.0);
  // Half overlap with equal sizes.
  const BinaryMask b = mask_from(4, 1, {0, 1, 1, 0});
  CHECK(mask_dice(a, b) == doctest::Approx(0.5));
  CHECK(mask_iou(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)) == 1.0);
  CHECK(mask_dice(BinaryMask(3, 3), BinaryMask(3, 3)) == 1.0);
  CHECK_THROWS_AS(mask_iou(a, BinaryMask(2, 2)), DimensionMismatch);
}

TEST_CASE("IoU never exceeds dice and both are symmetric") {
  CounterRng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    BinaryMask a(5, 5);
    BinaryMask b(5, 5);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) {
        a.set(x, y, rng.below(2) == 1);
        b.set(x, y, rng.below(3) == 0);
      }
    }
    REQUIRE(mask_iou(a, b) <= mask_dice(a, b) + 1e-15);
    REQUIRE(mask_iou(a, b) == mask_iou(b, a));
    REQUIRE(mask_dice(a, b) == mask_dice(b, a));
  }
}

TEST_CASE("retention reproduces the reference ratios") {
  CHECK(std::abs(retention(38.2, 41.7) - 91.6) <= 0.05);
  CHECK(std::abs(retention(42.3, 44.8) - 94.4) <= 0.05);
  CHECK(retention(40.0, 40.0) == 100.0);
  CHECK_THROWS_AS(retention(1.0, 0.0), InvalidArgument);
}

TEST_CASE("retention is homogeneous") {
  CounterRng rng(42);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(1, 60);
    const double b = rng.uniform(1, 60);
    const double k = rng.uniform(0.01, 100);
    CHECK(retention(k * a, k * b) == doctest::Approx(retention(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("majority vote downsampling with ties as background") {
  const BinaryMask m = mask_from(4, 2, {1, 1, 1, 0, 1, 0, 0, 0});
  const ClusterAssignment a = assignment_from_mask(m, 2, 1);
  // Left cell 3 of 4 set, right cell 1 of 4.
  CHECK(a.foreground == std::vector<std::uint8_t>{1, 0});
  const ClusterAssignment tie = assignment_from_mask(mask_from(2, 1, {1, 0}), 1, 1);
  CHECK(tie.foreground[0] == 0);
  CHECK(assignment_from_mask(m, 4, 2).foreground == std::vector<std::uint8_t>(m.bits().begin(), m.bits().end()));
  CHECK_THROWS_AS(assignment_from_mask(m, 5, 1), InvalidArgument);
  CHECK_THROWS_AS(assignment_from_mask(m, 0, 1), InvalidArgument);
}

TEST_CASE("foreground fraction inside a box") {
  BinaryMask m(4, 4);
  m.set(1, 1, true);
  m.set(2, 1, true);
  CHECK(foreground_fraction(m, BBox{1, 1, 3, 3}) == doctest::Approx(0.5));
  CHECK(foreground_fraction(m, BBox{0, 0, 4, 4}) == doctest::Approx(2.0 / 16));
  CHECK(foreground_fraction(m, BBox{10, 10, 12, 12}) == 0.0);
}
