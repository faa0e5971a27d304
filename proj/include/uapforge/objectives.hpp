#pragma once

#include <span>
#include <vector>

#include "uapforge/augmentation.hpp"
#include "uapforge/dataset.hpp"
#include "uapforge/model_adapter.hpp"
#include "uapforge/resample.hpp"

namespace uapforge {

struct DivergenceConfig {
  double temperature = 1.0;
};

/// KL(softmax(a / t) || softmax(b / t)). Non-negative, zero iff the two
/// softmaxes agree; differentiable in `a`.
double divergence(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const DivergenceConfig& cfg = {});

/// Gradient of divergence(a, b) with respect to `a`.
Eigen::VectorXd divergence_grad(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const DivergenceConfig& cfg = {});

/// A training pair with its clean reference embeddings f_I(x) and f_T(y).
struct TrainingExample {
  const ImageSample* image = nullptr;
  const Tokens* caption = nullptr;
  Eigen::VectorXd image_embedding;
  Eigen::VectorXd text_embedding;
};

std::vector<TrainingExample> prepare_examples(std::span<const CaptionPair> pairs, const EncoderBundle& bundle);

/// Loss value and its gradient with respect to the perturbation (summed,
/// not averaged, over the batch).
struct LossEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Sum over the batch of l(f_I(clip(x + delta)), f_I(x)) + l(f_I(clip(x + delta)), f_T(y)).
LossEvaluation loss_global(std::span<const TrainingExample> batch, const Tensor& delta, const EncoderBundle& bundle,
                           const DivergenceConfig& cfg);

/// Local-utility loss with delta_s = crop(delta):
///   l(f(x + delta_s), f(x)) + l(f(x + delta_s), f_T(y))
/// + l(f(x~ + delta_s), f(x)) + l(f(x~ + delta_s), f_T(y)) + l(f(x~ + delta_s), p)
/// summed over the batch. `crops` holds either one resampler shared by the
/// batch or one per example. `augmented[i]` must belong to `batch[i]`.
LossEvaluation loss_local(std::span<const TrainingExample> batch, std::span<const AugmentedPair> augmented,
                          const Tensor& delta, std::span<const BilinearResampler> crops, const EncoderBundle& bundle,
                          const DivergenceConfig& cfg);

struct LossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double total = 0.0;

  static LossBreakdown of(double l1, double l2) { return {l1, l2, l1 + l2}; }
};

struct LossConfig {
  DivergenceConfig divergence;
  bool global_term = true;
  bool local_term = true;
  /// One crop per example instead of one per mini-batch.
  bool per_sample_crops = false;
  CropResizeParams crop;
};

struct TotalEvaluation {
  LossBreakdown breakdown;
  Eigen::VectorXd gradient;
};

/// L = L1 + L2 with disabled terms contributing zero.
TotalEvaluation loss_total(std::span<const TrainingExample> batch, std::span<const AugmentedPair> augmented,
                           const Tensor& delta, std::span<const BilinearResampler> crops, const EncoderBundle& bundle,
                           const LossConfig& cfg);

/// Draws the crops loss_local needs under `cfg` (one, or one per example).
std::vector<BilinearResampler> draw_local_crops(const Geometry& g, std::size_t batch_size, const LossConfig& cfg,
                                                Rng& rng);

}  // namespace uapforge
