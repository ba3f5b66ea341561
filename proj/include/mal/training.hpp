#pragma once

#include <functional>
#include <vector>

#include "mal/crf.hpp"
#include "mal/image.hpp"
#include "mal/mil.hpp"
#include "mal/rng.hpp"
#include "mal/roi.hpp"

namespace mal {

struct LossWeights {
  double alpha_mil = 4.0;
  double alpha_crf = 0.5;
};

/// m_a = (m + m_t) / 2
ProbMask average_masks(const ProbMask& m, const ProbMask& m_t);

/// Dice self-training loss L = 1 - 2 sum l_i m_i / sum (l_i^2 + m_i^2)
/// and its gradient with respect to m; l is a constant pseudo-label.
/// Throws UndefinedDiceError when both inputs are identically zero.
LossAndGrad crf_self_training_loss(const ProbMask& m, const ProbMask& l);

struct TotalLoss {
  double loss = 0.0;
  double mil = 0.0;
  double crf = 0.0;
  ProbMask grad;     // d loss / d m, teacher and pseudo-label held fixed
  ProbMask refined;  // mean-field output on (m + m_t) / 2
  int crf_iters = 0;
};

/// L = alpha_mil * L_mil(m) + alpha_crf * L_crf(m, meanfield(m_a)).
/// Terms with zero weight are skipped entirely.
TotalLoss total_loss(const ProbMask& m, const ProbMask& m_t, const PairwiseKernel& kernel, const BagSet& bags,
                     const LossWeights& weights, const CrfParams& crf_params);
TotalLoss total_loss(const ProbMask& m, const ProbMask& m_t, const Image& img, const BagSet& bags,
                     const LossWeights& weights, const CrfParams& crf_params);

struct EmaState {
  std::vector<double> task_params;
  std::vector<double> teacher_params;
  double momentum = 0.996;
};

/// teacher <- momentum * teacher + (1 - momentum) * task
EmaState ema_update(EmaState state);
void ema_update_in_place(EmaState& state);

enum class Optimizer {
  /// z <- z - lr * dL/dz
  kGradientDescent,
  /// Adam on dL/dz with the usual bias correction.
  kAdam,
};

struct LogitConfig {
  double learning_rate = 1.0;
  int steps = 1000;
  /// Half-width of the uniform noise added to the zero initial logits.
  double init_noise = 0.01;
  double ema_momentum = 0.996;
  Optimizer optimizer = Optimizer::kGradientDescent;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  BagOptions bags;
};

struct LossRecord {
  int step = 0;
  double mil = 0.0;
  double crf = 0.0;
  double total = 0.0;
};

struct OptimizeResult {
  ProbMask mask;     // sigmoid of the final task logits
  ProbMask teacher;  // sigmoid of the final teacher logits
  ProbMask refined;  // mean field on the final averaged mask
  std::vector<LossRecord> trace;
};

/// Direct-logit surrogate for the task network: m = sigmoid(z) with one
/// free logit per crop pixel, teacher logits tracking z by EMA. Each step
/// evaluates total_loss, moves z along dL/dm * m (1 - m), then updates the
/// teacher. Throws NonFiniteError if the loss stops being finite.
OptimizeResult optimize_logits(const Image& img, const CropGeometry& geometry, const LossWeights& weights,
                               const CrfParams& crf_params, const LogitConfig& config, CounterRng& rng);

/// Same, with explicit bags (used by tests that bypass crop geometry).
OptimizeResult optimize_logits(const Image& img, const BagSet& bags, const LossWeights& weights, const CrfParams& crf_params, const LogitConfig& config,
                               CounterRng& rng);

double sigmoid(double z);

}  // namespace mal
