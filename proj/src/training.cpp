#include "mal/training.hpp"

#include <cmath>
#include <string>

#include "mal/errors.hpp"

namespace mal {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

ProbMask average_masks(const ProbMask& m, const ProbMask& m_t) {
  if (!m.same_shape(m_t)) throw DimensionMismatch("task and teacher masks differ in shape");
  ProbMask out(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = 0.5 * (m[i] + m_t[i]);
  return out;
}

LossAndGrad crf_self_training_loss(const ProbMask& m, const ProbMask& l) {
  if (!m.same_shape(l)) throw DimensionMismatch("mask and pseudo-label differ in shape");
  double overlap = 0.0;  // sum l m
  double den = 0.0;      // sum l^2 + m^2
  for (std::size_t i = 0; i < m.size(); ++i) {
    overlap += l[i] * m[i];
    den += l[i] * l[i] + m[i] * m[i];
  }
  if (den == 0.0) throw UndefinedDiceError("dice loss undefined: mask and pseudo-label are both zero");
  LossAndGrad out{1.0 - 2.0 * overlap / den, ProbMask(m.width(), m.height())};
  const double den2 = den * den;
  for (std::size_t i = 0; i < m.size(); ++i) {
    out.grad[i] = -2.0 * (l[i] * den - 2.0 * overlap * m[i]) / den2;
  }
  return out;
}

TotalLoss total_loss(const ProbMask& m, const ProbMask& m_t, const PairwiseKernel& kernel, const BagSet& bags,
                     const LossWeights& weights, const CrfParams& crf_params) {
  if (!(weights.alpha_mil >= 0.0 && weights.alpha_crf >= 0.0)) throw InvalidArgument("loss weights must be >= 0");
  TotalLoss out;
  out.grad = ProbMask(m.width(), m.height());
  const ProbMask m_a = average_masks(m, m_t);
  auto mf = mean_field(m_a, kernel, crf_params);
  out.refined = std::move(mf.refined);
  out.crf_iters = mf.iters_used;

  if (weights.alpha_mil > 0.0) {
    const auto mil = mil_loss(m, bags);
    out.mil = mil.loss;
    out.loss += weights.alpha_mil * mil.loss;
    for (std::size_t i = 0; i < m.size(); ++i) out.grad[i] += weights.alpha_mil * mil.grad[i];
  }
  if (weights.alpha_crf > 0.0) {
    const auto crf = crf_self_training_loss(m, out.refined);
    out.crf = crf.loss;
    out.loss += weights.alpha_crf * crf.loss;
    for (std::size_t i = 0; i < m.size(); ++i) out.grad[i] += weights.alpha_crf * crf.grad[i];
  }
  return out;
}

TotalLoss total_loss(const ProbMask& m, const ProbMask& m_t, const Image& img, const BagSet& bags,
                     const LossWeights& weights, const CrfParams& crf_params) {
  if (img.width() != m.width() || img.height() != m.height()) {
    throw DimensionMismatch("image and mask dimensions differ");
  }
  return total_loss(m, m_t, build_kernel(img, crf_params), bags, weights, crf_params);
}

void ema_update_in_place(EmaState& s) {
  if (s.task_params.size() != s.teacher_params.size()) {
    throw DimensionMismatch("task and teacher parameter vectors differ in length");
  }
  if (!(s.momentum >= 0.0 && s.momentum <= 1.0)) throw InvalidArgument("EMA momentum must lie in [0, 1]");
  for (std::size_t i = 0; i < s.task_params.size(); ++i) {
    s.teacher_params[i] = s.task_params[i] + s.momentum * (s.teacher_params[i] - s.task_params[i]);
  }
}

EmaState ema_update(EmaState state) {
  ema_update_in_place(state);
  return state;
}

namespace {

ProbMask sigmoid_of(const std::vector<double>& z, int w, int h) {
  ProbMask m(w, h);
  for (std::size_t i = 0; i < z.size(); ++i) m[i] = sigmoid(z[i]);
  return m;
}

}  // namespace

OptimizeResult optimize_logits(const Image& img, const BagSet& bags, const LossWeights& weights, const CrfParams& crf_params, const LogitConfig& cfg,
                               CounterRng& rng) {
  if (cfg.steps < 0) throw InvalidArgument("step count must be >= 0");
  if (bags.mask_w != img.width() || bags.mask_h != img.height()) {
    throw DimensionMismatch("bag grid and image dimensions differ");
  }
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const PairwiseKernel kernel = build_kernel(img, crf_params);

  EmaState ema;
  ema.momentum = cfg.ema_momentum;
  ema.task_params.resize(n);
  for (auto& z : ema.task_params) z = rng.uniform(-cfg.init_noise, cfg.init_noise);
  ema.teacher_params = ema.task_params;
  std::vector<double> adam_m(cfg.optimizer == Optimizer::kAdam ? n : 0);
  std::vector<double> adam_v(adam_m.size());

  OptimizeResult out;
  out.trace.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    const ProbMask m = sigmoid_of(ema.task_params, w, h);
    const ProbMask m_t = sigmoid_of(ema.teacher_params, w, h);
    const TotalLoss tl = total_loss(m, m_t, kernel, bags, weights, crf_params);
    if (!std::isfinite(tl.loss)) {
      throw NonFiniteError("non-finite loss at step " + std::to_string(step) + " (mil=" + std::to_string(tl.mil) +
                           ", crf=" + std::to_string(tl.crf) + ")");
    }
    out.trace.push_back({step, tl.mil, tl.crf, tl.loss});

    auto& z = ema.task_params;
    if (cfg.optimizer == Optimizer::kAdam) {
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, step + 1);
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, step + 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double g = tl.grad[i] * m[i] * (1.0 - m[i]);
        adam_m[i] = cfg.adam_beta1 * adam_m[i] + (1.0 - cfg.adam_beta1) * g;
        adam_v[i] = cfg.adam_beta2 * adam_v[i] + (1.0 - cfg.adam_beta2) * g * g;
        z[i] -= cfg.learning_rate * (adam_m[i] / c1) / (std::sqrt(adam_v[i] / c2) + cfg.adam_eps);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) z[i] -= cfg.learning_rate * tl.grad[i] * m[i] * (1.0 - m[i]);
    }
    ema_update_in_place(ema);
  }

  out.mask = sigmoid_of(ema.task_params, w, h);
  out.teacher = sigmoid_of(ema.teacher_params, w, h);
  out.refined = mean_field(average_masks(out.mask, out.teacher), kernel, crf_params).refined;
  return out;
}

OptimizeResult optimize_logits(const Image& img, const CropGeometry& geometry, const LossWeights& weights,
                               const CrfParams& crf_params, const LogitConfig& config, CounterRng& rng) {
  if (img.width() != geometry.crop_w || img.height() != geometry.crop_h) {
    throw DimensionMismatch("RoI image does not match crop geometry");
  }
  return optimize_logits(img, build_bags(geometry, config.bags), weights, crf_params, config, rng);
}

}  // namespace mal
