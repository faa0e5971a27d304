#include "uapforge/objectives.hpp"

#include <cmath>

#include "uapforge/errors.hpp"

namespace uapforge {

namespace {

Eigen::VectorXd log_softmax(const Eigen::VectorXd& v, double t) {
  const Eigen::VectorXd s = v / t;
  const double m = s.maxCoeff();
  const double lse = m + std::log((s.array() - m).exp().sum());
  return (s.array() - lse).matrix();
}

void check_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const DivergenceConfig& cfg) {
  if (a.size() != b.size()) {
    throw ShapeError("divergence arguments differ in dimension: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.size() < 2) throw ShapeError("divergence needs embeddings of dimension >= 2");
  if (!(cfg.temperature > 0.0)) throw ParameterError("temperature must be > 0");
}

}  // namespace

double divergence(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const DivergenceConfig& cfg) {
  check_pair(a, b, cfg);
  const Eigen::VectorXd la = log_softmax(a, cfg.temperature);
  const Eigen::VectorXd lb = log_softmax(b, cfg.temperature);
  const double kl = (la.array().exp() * (la - lb).array()).sum();
  return std::max(kl, 0.0);
}

Eigen::VectorXd divergence_grad(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const DivergenceConfig& cfg) {
  check_pair(a, b, cfg);
  const Eigen::VectorXd la = log_softmax(a, cfg.temperature);
  const Eigen::VectorXd lb = log_softmax(b, cfg.temperature);
  const Eigen::ArrayXd p = la.array().exp();
  const Eigen::ArrayXd r = (la - lb).array();
  const double kl = (p * r).sum();
  return (p * (r - kl) / cfg.temperature).matrix();
}

std::vector<TrainingExample> prepare_examples(std::span<const CaptionPair> pairs, const EncoderBundle& bundle) {
  if (pairs.empty()) return {};
  std::vector<Tensor> images;
  std::vector<Tokens> captions;
  images.reserve(pairs.size());
  captions.reserve(pairs.size());
  for (const auto& p : pairs) {
    images.push_back(p.image->pixels);
    captions.push_back(*p.caption);
  }
  const Eigen::MatrixXd ie = bundle.encode_image(images);
  const Eigen::MatrixXd te = bundle.encode_text(captions);
  std::vector<TrainingExample> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out[i] = {pairs[i].image, pairs[i].caption, ie.row(r).transpose(), te.row(r).transpose()};
  }
  return out;
}

namespace {

// References each adversarial row is pushed away from.
struct Targets {
  std::vector<std::vector<const Eigen::VectorXd*>> per_row;
};

struct Backprop {
  double value = 0.0;
  std::vector<Tensor> pixel_grads;
};

Backprop run_rows(std::span<const Tensor> adversarial, const Targets& targets, const EncoderBundle& bundle,
                  const DivergenceConfig& cfg) {
  EmbeddingLoss loss = [&](const Eigen::MatrixXd& emb) {
    EmbeddingLossValue lv{0.0, Eigen::MatrixXd::Zero(emb.rows(), emb.cols())};
    for (Eigen::Index r = 0; r < emb.rows(); ++r) {
      const Eigen::VectorXd e = emb.row(r).transpose();
      for (const Eigen::VectorXd* ref : targets.per_row[static_cast<std::size_t>(r)]) {
        lv.value += divergence(e, *ref, cfg);
        lv.gradient.row(r) += divergence_grad(e, *ref, cfg).transpose();
      }
    }
    return lv;
  };
  ImageGradient g = bundle.grad_image(loss, adversarial);
  return {g.value, std::move(g.pixels)};
}

// d clip(x + v)/dv is 1 inside [0, 1] and 0 where the clip is active.
void accumulate_masked(Eigen::VectorXd& into, const Tensor& pixel_grad, const Tensor& base, const Eigen::VectorXd& v) {
  const Eigen::ArrayXd s = base.values.array() + v.array();
  into.array() += ((s >= 0.0) && (s <= 1.0)).select(pixel_grad.values.array(), 0.0);
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string(what) + " is not finite");
}

}  // namespace

LossEvaluation loss_global(std::span<const TrainingExample> batch, const Tensor& delta, const EncoderBundle& bundle,
                           const DivergenceConfig& cfg) {
  if (batch.empty()) throw ContractError("loss_global needs a non-empty batch");
  require_geometry(bundle.input_geometry(), delta.geometry, "perturbation");
  std::vector<Tensor> adv;
  adv.reserve(batch.size());
  Targets targets;
  for (const auto& ex : batch) {
    adv.push_back(clip_unit(ex.image->pixels, delta.values));
    targets.per_row.push_back({&ex.image_embedding, &ex.text_embedding});
  }
  Backprop bp = run_rows(adv, targets, bundle, cfg);
  LossEvaluation out{bp.value, Eigen::VectorXd::Zero(delta.values.size())};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    accumulate_masked(out.gradient, bp.pixel_grads[i], batch[i].image->pixels, delta.values);
  }
  require_finite(out.value, "global loss");
  return out;
}

LossEvaluation loss_local(std::span<const TrainingExample> batch, std::span<const AugmentedPair> augmented,
                          const Tensor& delta, std::span<const BilinearResampler> crops, const EncoderBundle& bundle,
                          const DivergenceConfig& cfg) {
  if (batch.empty()) throw ContractError("loss_local needs a non-empty batch");
  if (augmented.size() != batch.size()) {
    throw ContractError("loss_local got " + std::to_string(augmented.size()) + " augmented pairs for " +
                        std::to_string(batch.size()) + " examples");
  }
  if (crops.size() != 1 && crops.size() != batch.size()) {
    throw ContractError("loss_local needs one shared crop or one crop per example");
  }
  const Geometry& g = bundle.input_geometry();
  require_geometry(g, delta.geometry, "perturbation");
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    if (augmented[i].soft_target.size() == 0) {
      throw ContractError("augmented pair " + std::to_string(i) + " has no soft target");
    }
    require_geometry(g, augmented[i].mixed.geometry, "augmented image");
  }

  const std::size_t n = batch.size();
  std::vector<Eigen::VectorXd> shifted(crops.size());
  for (std::size_t c = 0; c < crops.size(); ++c) {
    require_geometry(g, crops[c].source(), "crop source");
    require_geometry(g, crops[c].target(), "crop target");
    shifted[c] = crops[c].apply(delta.values);
  }
  auto shift_of = [&](std::size_t i) -> const Eigen::VectorXd& { return shifted[crops.size() == 1 ? 0 : i]; };

  // rows [0, n): clean images, rows [n, 2n): augmented images
  std::vector<Tensor> adv;
  adv.reserve(2 * n);
  Targets targets;
  for (std::size_t i = 0; i < n; ++i) {
    adv.push_back(clip_unit(batch[i].image->pixels, shift_of(i)));
    targets.per_row.push_back({&batch[i].image_embedding, &batch[i].text_embedding});
  }
  for (std::size_t i = 0; i < n; ++i) {
    adv.push_back(clip_unit(augmented[i].mixed, shift_of(i)));
    targets.per_row.push_back({&batch[i].image_embedding, &batch[i].text_embedding, &augmented[i].soft_target});
  }
  Backprop bp = run_rows(adv, targets, bundle, cfg);

  std::vector<Eigen::VectorXd> shifted_grad(crops.size(), Eigen::VectorXd::Zero(delta.values.size()));
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd& acc = shifted_grad[crops.size() == 1 ? 0 : i];
    accumulate_masked(acc, bp.pixel_grads[i], batch[i].image->pixels, shift_of(i));
    accumulate_masked(acc, bp.pixel_grads[n + i], augmented[i].mixed, shift_of(i));
  }
  LossEvaluation out{bp.value, Eigen::VectorXd::Zero(delta.values.size())};
  for (std::size_t c = 0; c < crops.size(); ++c) out.gradient += crops[c].adjoint(shifted_grad[c]);
  require_finite(out.value, "local loss");
  return out;
}

TotalEvaluation loss_total(std::span<const TrainingExample> batch, std::span<const AugmentedPair> augmented,
                           const Tensor& delta, std::span<const BilinearResampler> crops, const EncoderBundle& bundle,
                           const LossConfig& cfg) {
  TotalEvaluation out{{}, Eigen::VectorXd::Zero(delta.values.size())};
  double l1 = 0.0;
  double l2 = 0.0;
  if (cfg.global_term) {
    LossEvaluation e = loss_global(batch, delta, bundle, cfg.divergence);
    l1 = e.value;
    out.gradient += e.gradient;
  }
  if (cfg.local_term) {
    LossEvaluation e = loss_local(batch, augmented, delta, crops, bundle, cfg.divergence);
    l2 = e.value;
    out.gradient += e.gradient;
  }
  out.breakdown = LossBreakdown::of(l1, l2);
  return out;
}

std::vector<BilinearResampler> draw_local_crops(const Geometry& g, std::size_t batch_size, const LossConfig& cfg,
                                                Rng& rng) {
  std::vector<BilinearResampler> crops;
  const std::size_t count = cfg.per_sample_crops ? batch_size : 1;
  crops.reserve(count);
  for (std::size_t i = 0; i < count; ++i) crops.push_back(draw_uap_crop(g, cfg.crop, rng));
  return crops;
}

}  // namespace uapforge
