#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mal/image.hpp"

namespace mal {

enum class KernelForm {
  kSquared,   // omega * exp(-d^2 / (2 zeta^2))
  kAbsolute,  // omega * exp(-d / (2 zeta^2))
};

enum class MeanFieldUpdate {
  /// l_i <- clamp(l_i + sum_j K_ij l_j, 0, 1). Values can only grow, so
  /// with omega = 2 and eight neighbours any nonzero mask saturates.
  kClamp,
  /// Two-label update anchored on the input mask:
  ///   a = m_i + sum_j K_ij l_j,  b = (1 - m_i) + sum_j K_ij (1 - l_j),
  ///   l_i <- a / (a + b).
  kNormalized,
};

struct CrfParams {
  double omega = 2.0;
  double zeta = 0.5;
  int max_iters = 10;
  /// Stop once max |l_new - l_old| < tol.
  double tol = 1e-4;
  double threshold = 0.5;
  KernelForm kernel_form = KernelForm::kSquared;
  MeanFieldUpdate update = MeanFieldUpdate::kNormalized;
  /// Pixel-parallel workers inside one pass; results do not depend on it.
  int threads = 1;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// 8-neighbourhood affinities in compressed rows: the neighbours of pixel
/// i are neighbors[offsets[i] .. offsets[i+1]) in raster order.
class PairwiseKernel {
 public:
  PairwiseKernel() = default;
  PairwiseKernel(int width, int height, std::vector<std::uint32_t> offsets, std::vector<std::uint32_t> neighbors,
                 std::vector<double> weights);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return std::span(neighbors_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }
  std::span<const double> weights(std::size_t i) const {
    return std::span(weights_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }
  /// K_ij, or 0 when j is not a neighbour of i.
  double weight(std::size_t i, std::size_t j) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> neighbors_;
  std::vector<double> weights_;
};

/// d is the Euclidean norm of the colour difference between neighbours.
PairwiseKernel build_kernel(const Image& img, const CrfParams& params);

struct MeanFieldResult {
  ProbMask refined;
  int iters_used = 0;
};

/// Jacobi mean-field refinement: every pass reads only the previous
/// iterate. Stops early once no pixel moves by `tol` or more.
MeanFieldResult mean_field(const ProbMask& m, const PairwiseKernel& kernel, const CrfParams& params);

/// bit i = (l_i >= threshold)
BinaryMask threshold(const ProbMask& l, const CrfParams& params);
BinaryMask threshold(const ProbMask& l, double cut);

struct CrfEnergy {
  double unary = 0.0;
  double pairwise = 0.0;
  double total() const { return unary + pairwise; }
};

/// Diagnostic energy of a labelling: unary sum_i -log(m_a or 1 - m_a) with
/// m_a clamped to [1e-6, 1 - 1e-6], plus K_ij over unordered neighbour
/// pairs with different labels.
CrfEnergy crf_energy(const BinaryMask& labels, const ProbMask& m_a, const Image& img, const PairwiseKernel& kernel);

}  // namespace mal
