#include "uapforge/augmentation.hpp"

#include <algorithm>

#include "uapforge/errors.hpp"

namespace uapforge {

void ScMixParams::validate() const {
  if (!(alpha_mix > 0.0)) throw ParameterError("alpha_mix must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(beta1 > beta2)) throw ParameterError("beta1 must exceed beta2");
  if (beta1 + beta2 > 1.0) throw ParameterError("beta1 + beta2 must not exceed 1");
  if (!(crop_lo > 0.0 && crop_lo <= crop_hi && crop_hi <= 1.0)) {
    throw ParameterError("self-mix crop range must satisfy 0 < lo <= hi <= 1");
  }
}

void CropResizeParams::validate() const {
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) {
    throw ParameterError("crop scale range must satisfy 0 < lo <= hi <= 1");
  }
}

double draw_eta(Rng& rng, double alpha_mix) {
  const double e = sample_symmetric_beta(rng, alpha_mix);
  return std::max(e, 1.0 - e);
}

SelfMix self_mix_with(const ImageSample& image, const CropWindow& first, const CropWindow& second, double eta) {
  const Geometry& g = image.pixels.geometry;
  SelfMix out;
  out.eta = eta;
  out.first = BilinearResampler(g, first, g).apply(image.pixels);
  out.second = BilinearResampler(g, second, g).apply(image.pixels);
  Eigen::VectorXd m = eta * out.first.values + (1.0 - eta) * out.second.values;
  out.mixed = Tensor(g, m.cwiseMax(0.0).cwiseMin(1.0));
  return out;
}

SelfMix self_mix(const ImageSample& image, Rng& rng, const ScMixParams& params) {
  params.validate();
  const Geometry& g = image.pixels.geometry;
  const CropWindow a = draw_crop(g, params.crop_lo, params.crop_hi, rng);
  const CropWindow b = draw_crop(g, params.crop_lo, params.crop_hi, rng);
  return self_mix_with(image, a, b, draw_eta(rng, params.alpha_mix));
}

Tensor cross_mix(const Tensor& self_mixed, const Tensor& partner, double beta1, double beta2) {
  require_geometry(self_mixed.geometry, partner.geometry, "cross-mix partner");
  Eigen::VectorXd m = beta1 * self_mixed.values + beta2 * partner.values;
  // convex weights keep the range; the clamp only absorbs rounding
  return Tensor(self_mixed.geometry, m.cwiseMax(0.0).cwiseMin(1.0));
}

AugmentedPair scmix_pair(const ImageSample& image, const Tokens& caption, const Tensor& partner,
                         const ScMixParams& params, const EncoderBundle& bundle, Rng& rng) {
  SelfMix sm = self_mix(image, rng, params);
  AugmentedPair out;
  out.image_id = image.id;
  out.caption = caption;
  out.mixed = cross_mix(sm.mixed, partner, params.beta1, params.beta2);
  const Tensor crops[2] = {sm.first, sm.second};
  const Eigen::MatrixXd emb = bundle.encode_image(std::span<const Tensor>(crops, 2));
  out.soft_target = sm.eta * emb.row(0).transpose() + (1.0 - sm.eta) * emb.row(1).transpose();
  out.self_mixed = std::move(sm.mixed);
  out.eta = sm.eta;
  return out;
}

std::vector<AugmentedPair> scmix(const CaptionedImage& image, const Tensor& partner, const ScMixParams& params,
                                 const EncoderBundle& bundle, Rng& rng) {
  std::vector<AugmentedPair> out;
  out.reserve(image.captions.size());
  for (const auto& cap : image.captions) out.push_back(scmix_pair(image.image, cap, partner, params, bundle, rng));
  return out;
}

AugmentedPair identity_augmentation(const ImageSample& image, const Tokens& caption,
                                    const Eigen::VectorXd& clean_embedding) {
  return AugmentedPair{image.id, caption, image.pixels, image.pixels, clean_embedding, 1.0};
}

BilinearResampler draw_uap_crop(const Geometry& g, const CropResizeParams& params, Rng& rng) {
  params.validate();
  return BilinearResampler(g, draw_crop(g, params.lo, params.hi, rng), g);
}

Tensor crop_resize_uap(const Tensor& delta, const CropResizeParams& params, Rng& rng) {
  return draw_uap_crop(delta.geometry, params, rng).apply(delta);
}

}  // namespace uapforge
