#pragma once

#include <vector>

#include "uapforge/dataset.hpp"
#include "uapforge/model_adapter.hpp"
#include "uapforge/resample.hpp"
#include "uapforge/rng.hpp"

namespace uapforge {

/// Parameters of the self-mix / cross-mix augmentation.
struct ScMixParams {
  double alpha_mix = 1.0;  // Beta(alpha, alpha) shape
  double beta1 = 0.8;      // weight of the self-mixed image
  double beta2 = 0.2;      // weight of the partner image
  double crop_lo = 0.5;    // side fraction range of the self-mix crops
  double crop_hi = 1.0;

  /// Throws ParameterError unless beta1 > beta2, both in [0, 1), beta1 + beta2 <= 1,
  /// alpha_mix > 0 and 0 < crop_lo <= crop_hi <= 1.
  void validate() const;
};

/// Side-fraction range of the UAP crop transform.
struct CropResizeParams {
  double lo = 0.5;
  double hi = 1.0;

  void validate() const;
};

struct SelfMix {
  Tensor mixed;  // eta * first + (1 - eta) * second
  double eta = 1.0;
  Tensor first;
  Tensor second;
};

struct AugmentedPair {
  std::string image_id;
  Tokens caption;
  Tensor mixed;       // after cross-mix
  Tensor self_mixed;  // before cross-mix
  Eigen::VectorXd soft_target;
  double eta = 1.0;
};

/// eta = max(eta', 1 - eta') for eta' ~ Beta(alpha, alpha).
double draw_eta(Rng& rng, double alpha_mix);

/// Blend of two crops of `image`, each resized back to full geometry.
SelfMix self_mix(const ImageSample& image, Rng& rng, const ScMixParams& params);

/// Deterministic core of self_mix for fixed crops and blend weight.
SelfMix self_mix_with(const ImageSample& image, const CropWindow& first, const CropWindow& second, double eta);

/// beta1 * self_mixed + beta2 * partner.
Tensor cross_mix(const Tensor& self_mixed, const Tensor& partner, double beta1, double beta2);

/// Full augmentation of one (image, caption) pair against a partner image.
/// The soft target is eta * f_I(first) + (1 - eta) * f_I(second).
AugmentedPair scmix_pair(const ImageSample& image, const Tokens& caption, const Tensor& partner,
                         const ScMixParams& params, const EncoderBundle& bundle, Rng& rng);

/// One independently drawn AugmentedPair per caption of `image`.
std::vector<AugmentedPair> scmix(const CaptionedImage& image, const Tensor& partner, const ScMixParams& params,
                                 const EncoderBundle& bundle, Rng& rng);

/// Identity augmentation: mixed = self_mixed = x, soft target = f_I(x), eta = 1.
AugmentedPair identity_augmentation(const ImageSample& image, const Tokens& caption,
                                    const Eigen::VectorXd& clean_embedding);

/// Resampler for a random crop of a perturbation of geometry `g`, resized to `g`.
BilinearResampler draw_uap_crop(const Geometry& g, const CropResizeParams& params, Rng& rng);

/// Applies a random crop-resize to `delta` (values in the given geometry).
Tensor crop_resize_uap(const Tensor& delta, const CropResizeParams& params, Rng& rng);

}  // namespace uapforge
