#include "mal/crf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mal/errors.hpp"
#include "mal/parallel.hpp"

namespace mal {

void CrfParams::validate() const {
  if (!(omega > 0.0)) throw InvalidArgument("CRF omega must be > 0");
  if (!(zeta > 0.0)) throw InvalidArgument("CRF zeta must be > 0");
  if (max_iters < 1) throw InvalidArgument("CRF max_iters must be >= 1");
  if (!(tol >= 0.0)) throw InvalidArgument("CRF tol must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("CRF threshold must lie in (0, 1)");
}

PairwiseKernel::PairwiseKernel(int width, int height, std::vector<std::uint32_t> offsets,
                               std::vector<std::uint32_t> neighbors, std::vector<double> weights)
    : width_(width),
      height_(height),
      offsets_(std::move(offsets)),
      neighbors_(std::move(neighbors)),
      weights_(std::move(weights)) {
  if (offsets_.size() != static_cast<std::size_t>(width) * height + 1 || neighbors_.size() != weights_.size() ||
      offsets_.back() != neighbors_.size()) {
    throw DimensionMismatch("inconsistent pairwise kernel layout");
  }
}

double PairwiseKernel::weight(std::size_t i, std::size_t j) const {
  const auto nb = neighbors(i);
  const auto it = std::find(nb.begin(), nb.end(), static_cast<std::uint32_t>(j));
  return it == nb.end() ? 0.0 : weights(i)[static_cast<std::size_t>(it - nb.begin())];
}

PairwiseKernel build_kernel(const Image& img, const CrfParams& params) {
  params.validate();
  const int w = img.width();
  const int h = img.height();
  const double denom = 2.0 * params.zeta * params.zeta;
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> neighbors;
  std::vector<double> weights;
  offsets.reserve(static_cast<std::size_t>(w) * h + 1);
  neighbors.reserve(static_cast<std::size_t>(w) * h * 8);
  weights.reserve(static_cast<std::size_t>(w) * h * 8);
  offsets.push_back(0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto pi = img.pixel(x, y);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const auto pj = img.pixel(nx, ny);
          double d2 = 0.0;
          for (std::size_t c = 0; c < pi.size(); ++c) {
            const double diff = static_cast<double>(pi[c]) - pj[c];
            d2 += diff * diff;
          }
          const double arg = params.kernel_form == KernelForm::kSquared ? d2 : std::sqrt(d2);
          neighbors.push_back(static_cast<std::uint32_t>(ny * w + nx));
          weights.push_back(params.omega * std::exp(-arg / denom));
        }
      }
      offsets.push_back(static_cast<std::uint32_t>(neighbors.size()));
    }
  }
  return PairwiseKernel(w, h, std::move(offsets), std::move(neighbors), std::move(weights));
}

MeanFieldResult mean_field(const ProbMask& m, const PairwiseKernel& kernel, const CrfParams& params) {
  params.validate();
  if (m.width() != kernel.width() || m.height() != kernel.height()) {
    throw DimensionMismatch("mask and kernel dimensions differ");
  }
  for (double v : m.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("mean-field input must lie in [0, 1]");
  }

  const std::size_t n = m.size();
  ProbMask cur = m;
  ProbMask next(m.width(), m.height());
  const bool clamp = params.update == MeanFieldUpdate::kClamp;
  const std::size_t workers = static_cast<std::size_t>(std::max(params.threads, 1));
  std::vector<double> chunk_delta(workers);

  MeanFieldResult out;
  for (int it = 0; it < params.max_iters; ++it) {
    std::fill(chunk_delta.begin(), chunk_delta.end(), 0.0);
    const std::size_t chunk = (n + workers - 1) / workers;
    parallel_for(n, params.threads, [&](std::size_t begin, std::size_t end) {
      double delta = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto nb = kernel.neighbors(i);
        const auto wt = kernel.weights(i);
        double v = 0.0;
        if (clamp) {
          double acc = cur[i];
          for (std::size_t k = 0; k < nb.size(); ++k) acc += wt[k] * cur[nb[k]];
          v = std::clamp(acc, 0.0, 1.0);
        } else {
          double fg = m[i];
          double bg = 1.0 - m[i];
          for (std::size_t k = 0; k < nb.size(); ++k) {
            fg += wt[k] * cur[nb[k]];
            bg += wt[k] * (1.0 - cur[nb[k]]);
          }
          const double z = fg + bg;
          v = z > 0.0 ? fg / z : 0.0;
        }
        next[i] = v;
        delta = std::max(delta, std::abs(v - cur[i]));
      }
      chunk_delta[begin / chunk] = delta;
    });
    std::swap(cur, next);
    out.iters_used = it + 1;
    if (*std::max_element(chunk_delta.begin(), chunk_delta.end()) < params.tol) break;
  }
  out.refined = std::move(cur);
  return out;
}

BinaryMask threshold(const ProbMask& l, double cut) {
  std::vector<std::uint8_t> bits(l.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = l[i] >= cut ? 1 : 0;
  return BinaryMask(l.width(), l.height(), std::move(bits));
}

BinaryMask threshold(const ProbMask& l, const CrfParams& params) { return threshold(l, params.threshold); }

CrfEnergy crf_energy(const BinaryMask& labels, const ProbMask& m_a, const Image& img, const PairwiseKernel& kernel) {
  const bool dims_ok = labels.width() == m_a.width() && labels.height() == m_a.height() &&
                       img.width() == m_a.width() && img.height() == m_a.height() &&
                       kernel.width() == m_a.width() && kernel.height() == m_a.height();
  if (!dims_ok) throw DimensionMismatch("CRF energy inputs disagree on dimensions");
  constexpr double kEps = 1e-6;
  CrfEnergy e;
  for (std::size_t i = 0; i < m_a.size(); ++i) {
    const double p = std::clamp(m_a[i], kEps, 1.0 - kEps);
    e.unary -= std::log(labels[i] ? p : 1.0 - p);
    const auto nb = kernel.neighbors(i);
    const auto wt = kernel.weights(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] > i && labels[i] != labels[nb[k]]) e.pairwise += wt[k];
    }
  }
  return e;
}

}  // namespace mal
