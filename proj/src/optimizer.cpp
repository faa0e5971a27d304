#include "uapforge/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "uapforge/errors.hpp"

namespace uapforge {

ImageUAP ImageUAP::zeros(Geometry g, float epsilon) {
  return {g, Eigen::VectorXf::Zero(static_cast<Eigen::Index>(g.size())), epsilon};
}

ImageUAP ImageUAP::random(Geometry g, float epsilon, Rng& rng) {
  ImageUAP u = zeros(g, epsilon);
  std::uniform_real_distribution<double> dist(-static_cast<double>(epsilon), static_cast<double>(epsilon));
  for (Eigen::Index i = 0; i < u.delta.size(); ++i) {
    u.delta[i] = std::clamp(static_cast<float>(dist(rng)), -epsilon, epsilon);
  }
  return u;
}

float ImageUAP::linf() const { return delta.size() == 0 ? 0.0f : delta.cwiseAbs().maxCoeff(); }

Tensor ImageUAP::as_tensor() const { return Tensor(geometry, delta.cast<double>()); }

void ImageUAP::validate() const {
  if (static_cast<std::size_t>(delta.size()) != geometry.size()) {
    throw InvariantError("perturbation payload does not match geometry " + geometry.str());
  }
  if (!(epsilon >= 0.0f) || !std::isfinite(epsilon)) throw InvariantError("perturbation budget must be finite and >= 0");
  if (!delta.allFinite()) throw InvariantError("perturbation contains non-finite values");
  if (linf() > epsilon) {
    throw InvariantError("perturbation has |delta|_inf = " + std::to_string(linf()) + " above its budget " +
                         std::to_string(epsilon));
  }
}

double AttackConfig::resolved_step_size() const {
  return step_size ? *step_size : epsilon_image / iterations * 1.25;
}

std::vector<std::string> AttackConfig::problems() const {
  std::vector<std::string> out;
  if (!(epsilon_image > 0.0)) out.push_back("epsilon_I must be > 0");
  if (epsilon_text < 1) out.push_back("epsilon_T must be >= 1");
  if (iterations < 1) out.push_back("iterations (M_I) must be >= 1");
  if (text_iterations < 1) out.push_back("text_iterations (M_T) must be >= 1");
  if (batch_size < 1) out.push_back("batch_size must be >= 1");
  if (iterations >= 1 && !(resolved_step_size() > 0.0)) out.push_back("step_size must be > 0");
  if (!(gamma1 >= 0.0 && gamma1 < 1.0) || !(gamma2 >= 0.0 && gamma2 < 1.0)) {
    out.push_back("gamma1 and gamma2 must lie in [0, 1)");
  }
  if (lookahead < 0) out.push_back("lookahead must be >= 0");
  if (future_sign != 1 && future_sign != -1) out.push_back("future_sign must be +1 or -1");
  try {
    if (augment.enabled) augment.scmix.validate();
  } catch (const ParameterError& e) {
    out.push_back(e.what());
  }
  try {
    if (loss.local_term) loss.crop.validate();
  } catch (const ParameterError& e) {
    out.push_back(e.what());
  }
  if (!(loss.divergence.temperature > 0.0)) out.push_back("temperature must be > 0");
  if (!loss.global_term && !loss.local_term) out.push_back("at least one loss term must be enabled");
  return out;
}

void AttackConfig::validate() const {
  const std::vector<std::string> p = problems();
  if (p.empty()) return;
  std::string msg = p.front();
  for (std::size_t i = 1; i < p.size(); ++i) msg += "; " + p[i];
  throw ParameterError(msg);
}

Eigen::VectorXd sign_of(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Eigen::VectorXd grad_batch(const BatchObjective& objective, const ImageUAP& delta, std::size_t batch_size,
                           double* value) {
  if (batch_size == 0) throw ContractError("grad_batch needs a non-empty batch");
  LossEvaluation e = objective(delta.as_tensor());
  if (static_cast<std::size_t>(e.gradient.size()) != delta.geometry.size()) {
    throw ShapeError("objective gradient does not match perturbation geometry " + delta.geometry.str());
  }
  if (value) *value = e.value;
  return e.gradient / static_cast<double>(batch_size);
}

Eigen::VectorXd lookahead_future_grad(const ImageUAP& delta, std::span<const TrainingExample> batch, int depth,
                                      double step_size, const EncoderBundle& bundle, const DivergenceConfig& cfg,
                                      FutureMode mode) {
  const auto size = static_cast<Eigen::Index>(delta.geometry.size());
  if (depth <= 0) return Eigen::VectorXd::Zero(size);
  const double scale = 1.0 / static_cast<double>(batch.size());
  ImageUAP virt = delta;
  Eigen::VectorXd g = loss_global(batch, virt.as_tensor(), bundle, cfg).gradient * scale;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(size);
  for (int i = 1; i <= depth; ++i) {
    virt = pgd_update(virt, g, step_size);
    g = loss_global(batch, virt.as_tensor(), bundle, cfg).gradient * scale;
    if (mode == FutureMode::Mean) {
      acc += g;
    } else {
      acc = g;
    }
  }
  return mode == FutureMode::Mean ? Eigen::VectorXd(acc / depth) : acc;
}

Eigen::VectorXd combine(const Eigen::VectorXd& g, const MomentumState& state, const Eigen::VectorXd& g_future) {
  if (state.previous.size() != g.size() || g_future.size() != g.size()) {
    throw ShapeError("combine: gradient sizes differ (" + std::to_string(g.size()) + ", " +
                     std::to_string(state.previous.size()) + ", " + std::to_string(g_future.size()) + ")");
  }
  return g + state.gamma1 * state.previous + (state.future_sign * state.gamma2) * g_future;
}

ImageUAP pgd_update(const ImageUAP& delta, const Eigen::VectorXd& direction, double step_size) {
  if (static_cast<std::size_t>(direction.size()) != delta.geometry.size()) {
    throw ShapeError("update direction does not match perturbation geometry " + delta.geometry.str());
  }
  ImageUAP out = delta;
  const float eps = delta.epsilon;
  for (Eigen::Index i = 0; i < direction.size(); ++i) {
    const double d = direction[i];
    const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    out.delta[i] = std::clamp(static_cast<float>(static_cast<double>(delta.delta[i]) + step_size * s), -eps, eps);
  }
  return out;
}

AttackResult run_image_attack(const PairedDataset& dataset, const EncoderBundle& bundle, const AttackConfig& cfg,
                              const StepObserver& observer) {
  cfg.validate();
  const Geometry& g = bundle.input_geometry();
  require_geometry(g, dataset.geometry(), "dataset vs adapter input");

  const std::vector<CaptionPair> pairs = expand_by_captions(dataset);
  const std::vector<TrainingExample> examples = prepare_examples(pairs, bundle);
  const double step = cfg.resolved_step_size();

  Rng init_rng = derive_stream(cfg.seed, streams::kInit);
  Rng order_rng = derive_stream(cfg.seed, streams::kBatchOrder);
  Rng mix_rng = derive_stream(cfg.seed, streams::kScMix);
  Rng crop_rng = derive_stream(cfg.seed, streams::kUapCrop);

  AttackResult result{ImageUAP::random(g, static_cast<float>(cfg.epsilon_image), init_rng), {}};
  MomentumState state{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size())), cfg.gamma1, cfg.gamma2,
                      cfg.lookahead, cfg.future_sign};

  std::size_t step_index = 0;
  for (int epoch = 1; epoch <= cfg.iterations; ++epoch) {
    Eigen::VectorXd last_combined = state.previous;
    for (const auto& idx : epoch_batches(examples.size(), static_cast<std::size_t>(cfg.batch_size), order_rng)) {
      std::vector<TrainingExample> batch;
      batch.reserve(idx.size());
      for (std::size_t i : idx) batch.push_back(examples[i]);

      std::vector<AugmentedPair> augmented;
      std::vector<BilinearResampler> crops;
      if (cfg.loss.local_term) {
        augmented.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const TrainingExample& ex = batch[i];
          if (!cfg.augment.enabled) {
            augmented.push_back(identity_augmentation(*ex.image, *ex.caption, ex.image_embedding));
            continue;
          }
          std::size_t partner = i;
          if (batch.size() > 1) {
            partner = std::uniform_int_distribution<std::size_t>(0, batch.size() - 2)(mix_rng);
            if (partner >= i) ++partner;
          }
          augmented.push_back(
              scmix_pair(*ex.image, *ex.caption, batch[partner].image->pixels, cfg.augment.scmix, bundle, mix_rng));
        }
        crops = draw_local_crops(g, batch.size(), cfg.loss, crop_rng);
      }

      TraceRow row;
      row.step = ++step_index;
      row.epoch = epoch;
      TotalEvaluation total;
      Eigen::VectorXd future = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
      try {
        total = loss_total(batch, augmented, result.uap.as_tensor(), crops, bundle, cfg.loss);
        if (cfg.lookahead > 0 && cfg.gamma2 != 0.0) {
          future = lookahead_future_grad(result.uap, batch, cfg.lookahead, step, bundle, cfg.loss.divergence,
                                         cfg.future_mode);
        }
      } catch (const NumericalError& e) {
        throw NumericalError("step " + std::to_string(row.step) + " (epoch " + std::to_string(epoch) +
                             "): " + e.what());
      }
      if (!std::isfinite(total.breakdown.total) || !total.gradient.allFinite() || !future.allFinite()) {
        throw NumericalError("step " + std::to_string(row.step) + " (epoch " + std::to_string(epoch) +
                             "): non-finite loss or gradient");
      }
      const Eigen::VectorXd grad = total.gradient / static_cast<double>(batch.size());
      last_combined = combine(grad, state, future);
      result.uap = pgd_update(result.uap, last_combined, step);
      if (cfg.cadence == MomentumCadence::PerBatch) state.previous = last_combined;

      row.l1 = total.breakdown.l1;
      row.l2 = total.breakdown.l2;
      row.linf = result.uap.linf();
      result.trace.push_back(row);
      if (observer) observer(row, result.uap);
    }
    if (cfg.cadence == MomentumCadence::PerEpoch) state.previous = last_combined;
  }
  return result;
}

}  // namespace uapforge
