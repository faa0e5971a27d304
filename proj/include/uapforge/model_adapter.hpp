#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uapforge/dataset.hpp"
#include "uapforge/tensor.hpp"

namespace uapforge {

/// Reserved token that text encoders must treat as "no information".
inline constexpr std::string_view kMaskToken = "<mask>";

/// Value of a scalar loss over an embedding matrix and its gradient with
/// respect to that matrix (same shape, B x E).
struct EmbeddingLossValue {
  double value = 0.0;
  Eigen::MatrixXd gradient;
};

using EmbeddingLoss = std::function<EmbeddingLossValue(const Eigen::MatrixXd& embeddings)>;

/// Loss value plus d(loss)/d(pixels) for each image of the batch.
struct ImageGradient {
  double value = 0.0;
  std::vector<Tensor> pixels;
};

/// Unimodal image and text encoders of a (surrogate or target) dual-encoder
/// model. Images enter in [0, 1] pixel space; any model-specific
/// normalization happens inside the implementation. Implementations must be
/// deterministic and safe to call concurrently.
class EncoderBundle {
 public:
  virtual ~EncoderBundle() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Geometry input_geometry() const = 0;
  [[nodiscard]] virtual int embed_dim() const = 0;

  /// B x E, one row per image.
  [[nodiscard]] virtual Eigen::MatrixXd encode_image(std::span<const Tensor> batch) const = 0;
  /// B x E, one row per caption.
  [[nodiscard]] virtual Eigen::MatrixXd encode_text(std::span<const Tokens> batch) const = 0;
  /// Backpropagates `loss` through encode_image.
  [[nodiscard]] virtual ImageGradient grad_image(const EmbeddingLoss& loss, std::span<const Tensor> batch) const = 0;

  Eigen::VectorXd encode_image(const Tensor& image) const;
  Eigen::VectorXd encode_text(const Tokens& caption) const;
};

/// Shared input checks for implementations: non-empty batch whose images all
/// have `expected` geometry.
void check_image_batch(std::span<const Tensor> batch, const Geometry& expected);

/// Calls `loss` and verifies it returned a gradient shaped like `embeddings`.
EmbeddingLossValue evaluate_embedding_loss(const EmbeddingLoss& loss, const Eigen::MatrixXd& embeddings);

/// Resolves an adapter spec string:
///   "toy" | "toy:seed=3,dim=64,gain=0.35,size=32x32x3"
///   "external:/path/libadapter.so[?options]"
/// `default_geometry` is used when a toy spec does not name a size.
std::unique_ptr<EncoderBundle> make_adapter(std::string_view spec, const Geometry& default_geometry);

/// Entry point an external adapter library must export (extern "C").
using AdapterFactory = EncoderBundle* (*)(const char* options);
inline constexpr const char* kAdapterFactorySymbol = "uapforge_create_adapter";

}  // namespace uapforge
