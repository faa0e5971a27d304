#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "uapforge/augmentation.hpp"
#include "uapforge/dataset.hpp"
#include "uapforge/model_adapter.hpp"
#include "uapforge/objectives.hpp"

namespace uapforge {

/// Universal image perturbation. Stored in single precision; the budget
/// |delta|_inf <= epsilon holds exactly whenever the object is observable.
struct ImageUAP {
  Geometry geometry;
  Eigen::VectorXf delta;
  float epsilon = 0.0f;

  static ImageUAP zeros(Geometry g, float epsilon);
  /// Uniform in [-epsilon, epsilon].
  static ImageUAP random(Geometry g, float epsilon, Rng& rng);

  [[nodiscard]] float linf() const;
  [[nodiscard]] Tensor as_tensor() const;
  /// Throws InvariantError when the budget or payload size is violated.
  void validate() const;
};

enum class FutureMode { Mean, Last };
enum class MomentumCadence { PerEpoch, PerBatch };

struct MomentumState {
  Eigen::VectorXd previous;  // g_p, zero-initialized
  double gamma1 = 0.9;
  double gamma2 = 0.1;
  int lookahead = 2;
  int future_sign = -1;  // -1 discounts the future gradient, +1 adds it
};

struct AugmentConfig {
  bool enabled = true;
  ScMixParams scmix;
};

struct AttackConfig {
  double epsilon_image = 12.0 / 255.0;
  int epsilon_text = 1;
  /// Unset means epsilon_image / iterations * 1.25.
  std::optional<double> step_size;
  int iterations = 100;
  int text_iterations = 15;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double gamma1 = 0.9;
  double gamma2 = 0.1;
  int lookahead = 2;
  int future_sign = -1;
  FutureMode future_mode = FutureMode::Mean;
  MomentumCadence cadence = MomentumCadence::PerEpoch;
  AugmentConfig augment;
  LossConfig loss;

  [[nodiscard]] double resolved_step_size() const;
  /// Every violated constraint, empty when valid.
  [[nodiscard]] std::vector<std::string> problems() const;
  /// Throws ParameterError naming every problem.
  void validate() const;
};

/// Elementwise sign with sign(0) = 0.
Eigen::VectorXd sign_of(const Eigen::VectorXd& v);

using BatchObjective = std::function<LossEvaluation(const Tensor& delta)>;

/// (1 / batch_size) * gradient of `objective` at `delta`.
Eigen::VectorXd grad_batch(const BatchObjective& objective, const ImageUAP& delta, std::size_t batch_size,
                           double* value = nullptr);

/// Mean (or last) L1 gradient along `depth` virtual sign steps from `delta`
/// on the same batch. `delta` itself is never modified. depth 0 gives zeros.
Eigen::VectorXd lookahead_future_grad(const ImageUAP& delta, std::span<const TrainingExample> batch, int depth,
                                      double step_size, const EncoderBundle& bundle, const DivergenceConfig& cfg,
                                      FutureMode mode = FutureMode::Mean);

/// g + gamma1 * g_prev + future_sign * gamma2 * g_future.
Eigen::VectorXd combine(const Eigen::VectorXd& g, const MomentumState& state, const Eigen::VectorXd& g_future);

/// Clip_eps(delta + step * sign(direction)).
ImageUAP pgd_update(const ImageUAP& delta, const Eigen::VectorXd& direction, double step_size);

struct TraceRow {
  std::size_t step = 0;
  int epoch = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;  // after the update
};

struct AttackResult {
  ImageUAP uap;
  std::vector<TraceRow> trace;
};

using StepObserver = std::function<void(const TraceRow&, const ImageUAP&)>;

/// Seeds of the independent random streams a run consumes.
namespace streams {
inline constexpr const char* kInit = "uap-init";
inline constexpr const char* kBatchOrder = "batch-order";
inline constexpr const char* kScMix = "scmix";
inline constexpr const char* kUapCrop = "uap-crop";
}  // namespace streams

/// The full image attack: per epoch, shuffle the caption-expanded pairs, and
/// for every mini-batch augment, take the loss gradient, the look-ahead
/// gradient, combine with the previous gradient and take a projected sign step.
AttackResult run_image_attack(const PairedDataset& dataset, const EncoderBundle& bundle, const AttackConfig& cfg,
                              const StepObserver& observer = {});

}  // namespace uapforge
