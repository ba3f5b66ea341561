#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mal/crf.hpp"
#include "mal/errors.hpp"
#include "mal/rng.hpp"

using namespace mal;

namespace {

// Dense kernel computed from the definition with no neighbour lists.
std::vector<std::vector<double>> dense_kernel(const Image& img, const CrfParams& p) {
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          if (std::abs(u - x) > 1 || std::abs(v - y) > 1 || (u == x && v == y)) continue;
          double d2 = 0.0;
          for (int c = 0; c < img.channels(); ++c) {
            const double diff = static_cast<double>(img.at(x, y, c)) - img.at(u, v, c);
            d2 += diff * diff;
          }
          const double d = p.kernel_form == KernelForm::kSquared ? d2 : std::sqrt(d2);
          k[static_cast<std::size_t>(y) * w + x][static_cast<std::size_t>(v) * w + u] =
              p.omega * std::exp(-d / (2 * p.zeta * p.zeta));
        }
      }
    }
  }
  return k;
}

std::vector<double> naive_mean_field(const std::vector<double>& m, const std::vector<std::vector<double>>& k,
                                     const CrfParams& p) {
  std::vector<double> l = m;
  for (int it = 0; it < p.max_iters; ++it) {
    std::vector<double> next(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
      double msg_fg = 0.0;
      double msg_bg = 0.0;
      for (std::size_t j = 0; j < l.size(); ++j) {
        msg_fg += k[i][j] * l[j];
        msg_bg += k[i][j] * (1 - l[j]);
      }
      if (p.update == MeanFieldUpdate::kClamp) {
        next[i] = std::clamp(l[i] + msg_fg, 0.0, 1.0);
      } else {
        next[i] = (m[i] + msg_fg) / (m[i] + msg_fg + 1 - m[i] + msg_bg);
      }
    }
    l = next;
  }
  return l;
}

Image two_colour(int w, int h, CounterRng& rng) {
  Image img(w, h, 3);
  const float a[3] = {0.9F, 0.1F, 0.2F};
  const float b[3] = {0.1F, 0.8F, 0.3F};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool fg = x >= 2 && x < 6 && y >= 1 && y < 5;
      for (int c = 0; c < 3; ++c) {
        const float base = fg ? a[c] : b[c];
        img.set(x, y, c, std::clamp(base + static_cast<float>(0.05 * rng.normal()), 0.0F, 1.0F));
      }
    }
  }
  return img;
}

}  // namespace

TEST_CASE("kernel values for equal and unit-distance colours") {
  const Image img(2, 1, 1, std::vector<float>{0.0F, 1.0F});
  const PairwiseKernel k = build_kernel(img, CrfParams{});
  CHECK(k.weight(0, 1) == doctest::Approx(2.0 * std::exp(-2.0)));
  CHECK(k.weight(0, 1) == doctest::Approx(0.2707).epsilon(1e-3));
  const PairwiseKernel same = build_kernel(Image(2, 1, 1, 0.3F), CrfParams{});
  CHECK(same.weight(0, 1) == 2.0);
  CHECK(same.weight(0, 0) == 0.0);
}

TEST_CASE("the absolute form uses the unsquared distance") {
  const Image img(2, 1, 1, std::vector<float>{0.0F, 0.5F});
  CrfParams p;
  p.kernel_form = KernelForm::kAbsolute;
  CHECK(build_kernel(img, p).weight(0, 1) == doctest::Approx(2.0 * std::exp(-1.0)));
  p.kernel_form = KernelForm::kSquared;
  CHECK(build_kernel(img, p).weight(0, 1) == doctest::Approx(2.0 * std::exp(-0.5)));
}

TEST_CASE("corners, edges and interior pixels have 3, 5 and 8 neighbours") {
  const PairwiseKernel k = build_kernel(Image(4, 3, 1, 0.5F), CrfParams{});
  CHECK(k.pixel_count() == 12);
  CHECK(k.neighbors(0).size() == 3);
  CHECK(k.neighbors(1).size() == 5);
  CHECK(k.neighbors(4).size() == 5);
  CHECK(k.neighbors(5).size() == 8);
  CHECK(k.neighbors(11).size() == 3);
  const PairwiseKernel single = build_kernel(Image(1, 1, 1, 0.5F), CrfParams{});
  CHECK(single.neighbors(0).empty());
}

TEST_CASE("the kernel is symmetric, bounded and matches the dense definition") {
  CounterRng rng(20);
  for (const auto form : {KernelForm::kSquared, KernelForm::kAbsolute}) {
    CrfParams p;
    p.kernel_form = form;
    Image img(6, 5, 3);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 6; ++x) {
        for (int c = 0; c < 3; ++c) img.set(x, y, c, static_cast<float>(rng.uniform()));
      }
    }
    const PairwiseKernel k = build_kernel(img, p);
    const auto dense = dense_kernel(img, p);
    for (std::size_t i = 0; i < k.pixel_count(); ++i) {
      for (std::size_t j = 0; j < k.pixel_count(); ++j) {
        REQUIRE(k.weight(i, j) == doctest::Approx(dense[i][j]).epsilon(1e-12));
        REQUIRE(k.weight(i, j) == k.weight(j, i));
        REQUIRE(k.weight(i, j) >= 0.0);
        REQUIRE(k.weight(i, j) <= p.omega);
      }
    }
  }
}

TEST_CASE("parameter validation") {
  CrfParams p;
  p.zeta = 0.0;
  CHECK_THROWS_AS(build_kernel(Image(2, 2, 1), p), InvalidArgument);
  p = CrfParams{};
  p.max_iters = 0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = CrfParams{};
  p.threshold = 1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = CrfParams{};
  p.omega = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("mean field keeps constant masks fixed") {
  const PairwiseKernel k = build_kernel(Image(5, 4, 3, 0.4F), CrfParams{});
  CrfParams one;
  one.max_iters = 1;
  const MeanFieldResult zero = mean_field(ProbMask(5, 4, 0.0), k, one);
  CHECK(zero.iters_used == 1);
  for (double v : zero.refined.data()) CHECK(v == 0.0);
  const MeanFieldResult ones = mean_field(ProbMask(5, 4, 1.0), k, CrfParams{});
  for (double v : ones.refined.data()) CHECK(v == doctest::Approx(1.0));
  CHECK(ones.iters_used == 1);
  CrfParams clamp;
  clamp.update = MeanFieldUpdate::kClamp;
  const MeanFieldResult clamped = mean_field(ProbMask(5, 4, 0.0), k, clamp);
  for (double v : clamped.refined.data()) CHECK(v == 0.0);
}

TEST_CASE("mean field matches the dense oracle for both updates and kernel forms") {
  CounterRng rng(21);
  for (const auto form : {KernelForm::kSquared, KernelForm::kAbsolute}) {
    for (const auto update : {MeanFieldUpdate::kNormalized, MeanFieldUpdate::kClamp}) {
      CrfParams p;
      p.kernel_form = form;
      p.update = update;
      p.tol = 0.0;
      const Image img = two_colour(8, 8, rng);
      ProbMask m(8, 8);
      for (auto& v : m.data()) v = rng.uniform();
      const MeanFieldResult r = mean_field(m, build_kernel(img, p), p);
      CHECK(r.iters_used == p.max_iters);
      const auto expected = naive_mean_field(std::vector<double>(m.data().begin(), m.data().end()),
                                             dense_kernel(img, p), p);
      for (std::size_t i = 0; i < expected.size(); ++i) REQUIRE(std::abs(r.refined[i] - expected[i]) < 1e-12);
    }
  }
}

TEST_CASE("the clamp update saturates any nonzero mask") {
  CrfParams p;
  p.update = MeanFieldUpdate::kClamp;
  ProbMask m(6, 6, 0.0);
  m.at(3, 3) = 0.2;
  const MeanFieldResult r = mean_field(m, build_kernel(Image(6, 6, 3, 0.5F), p), p);
  for (double v : r.refined.data()) CHECK(v == 1.0);
}

TEST_CASE("mean field stops once updates fall below the tolerance") {
  CrfParams p;
  p.max_iters = 50;
  p.tol = 1e-3;
  CounterRng rng(22);
  ProbMask m(6, 6);
  for (auto& v : m.data()) v = rng.uniform();
  const MeanFieldResult r = mean_field(m, build_kernel(Image(6, 6, 1, 0.5F), p), p);
  CHECK(r.iters_used < 50);
  CHECK(r.iters_used >= 1);
}

TEST_CASE("mean field results do not depend on the worker count") {
  CounterRng rng(23);
  const Image img = two_colour(8, 8, rng);
  ProbMask m(8, 8);
  for (auto& v : m.data()) v = rng.uniform();
  CrfParams p;
  p.tol = 0.0;
  const PairwiseKernel k = build_kernel(img, p);
  const ProbMask base = mean_field(m, k, p).refined;
  for (int t : {2, 3, 4, 8, 64}) {
    p.threads = t;
    CHECK(mean_field(m, k, p).refined == base);
  }
}

TEST_CASE("mean field input validation") {
  const PairwiseKernel k = build_kernel(Image(3, 3, 1), CrfParams{});
  CHECK_THROWS_AS(mean_field(ProbMask(3, 2), k, CrfParams{}), DimensionMismatch);
  CHECK_THROWS_AS(mean_field(ProbMask(3, 3, 1.5), k, CrfParams{}), InvalidArgument);
}

TEST_CASE("the normalized update smooths within a region and stays in range") {
  // On a flat image a lone bright pixel is pulled towards its neighbours.
  ProbMask m(7, 7, 0.1);
  m.at(3, 3) = 0.9;
  CrfParams p;
  p.tol = 0.0;
  const ProbMask l = mean_field(m, build_kernel(Image(7, 7, 3, 0.5F), p), p).refined;
  CHECK(l.at(3, 3) < 0.9);
  CHECK(l.at(3, 3) > l.at(0, 0));
  for (double v : l.data()) {
    CHECK(v >= 0.1 - 1e-12);
    CHECK(v <= 0.9);
  }
  // Across a strong edge the two sides keep their own values.
  Image split(8, 4, 3);
  for (int y = 0; y < 4; ++y) {
    for (int x = 4; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) split.set(x, y, c, 1.0F);
    }
  }
  ProbMask half(8, 4, 0.2);
  for (int y = 0; y < 4; ++y) {
    for (int x = 4; x < 8; ++x) half.at(x, y) = 0.8;
  }
  const ProbMask r = mean_field(half, build_kernel(split, p), p).refined;
  CHECK(r.at(0, 0) < 0.25);
  CHECK(r.at(7, 3) > 0.75);
}

TEST_CASE("threshold keeps values at or above the cut") {
  const ProbMask l(4, 1, std::vector<double>{0.49, 0.5, 0.51, 1.0});
  const BinaryMask b = threshold(l, CrfParams{});
  CHECK_FALSE(b[0]);
  CHECK(b[1]);
  CHECK(b[2]);
  CHECK(b[3]);
  CHECK(threshold(l, 0.6).count() == 1);
}

TEST_CASE("energy of hand-worked labellings") {
  const Image img(2, 1, 1, std::vector<float>{0.0F, 1.0F});
  const PairwiseKernel k = build_kernel(img, CrfParams{});
  const ProbMask m(2, 1, std::vector<double>{0.8, 0.3});
  const CrfEnergy agree = crf_energy(BinaryMask(2, 1, std::vector<std::uint8_t>{1, 0}), m, img, k);
  CHECK(agree.unary == doctest::Approx(-std::log(0.8) - std::log(0.7)));
  CHECK(agree.pairwise == doctest::Approx(2.0 * std::exp(-2.0)));
  const CrfEnergy same = crf_energy(BinaryMask(2, 1, true), m, img, k);
  CHECK(same.pairwise == 0.0);
  CHECK(same.total() == doctest::Approx(-std::log(0.8) - std::log(0.3)));
  // Saturated probabilities are clamped, so the unary stays finite.
  const CrfEnergy hard = crf_energy(BinaryMask(2, 1, false), ProbMask(2, 1, 1.0), img, k);
  CHECK(hard.unary == doctest::Approx(-2.0 * std::log(1e-6)));
}

TEST_CASE("energy matches a brute-force sum over every 3x3 labelling") {
  CounterRng rng(24);
  Image img(3, 3, 1);
  ProbMask m(3, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      img.set(x, y, 0, static_cast<float>(rng.uniform()));
      m.at(x, y) = rng.uniform(0.05, 0.95);
    }
  }
  const CrfParams p;
  const PairwiseKernel k = build_kernel(img, p);
  const auto dense = dense_kernel(img, p);
  double checker_energy = 0.0;
  double best = 1e300;
  for (unsigned bits = 0; bits < 512; ++bits) {
    std::vector<std::uint8_t> lab(9);
    for (int i = 0; i < 9; ++i) lab[static_cast<std::size_t>(i)] = (bits >> i) & 1U;
    double expected = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      expected -= std::log(lab[i] ? m[i] : 1 - m[i]);
      for (std::size_t j = i + 1; j < 9; ++j) {
        if (lab[i] != lab[j]) expected += dense[i][j];
      }
    }
    const double got = crf_energy(BinaryMask(3, 3, lab), m, img, k).total();
    REQUIRE(got == doctest::Approx(expected).epsilon(1e-12));
    best = std::min(best, got);
    if (bits == 0b101010101) checker_energy = got;
  }
  CHECK(checker_energy > best);
}

TEST_CASE("energy rejects mismatched inputs") {
  const Image img(3, 3, 1);
  const PairwiseKernel k = build_kernel(img, CrfParams{});
  CHECK_THROWS_AS(crf_energy(BinaryMask(3, 2), ProbMask(3, 3), img, k), DimensionMismatch);
}
