#pragma once

#include <cstdint>
#include <mutex>
#include <unordered_map>

#include "uapforge/model_adapter.hpp"

namespace uapforge {

struct ToyEncoderOptions {
  std::uint64_t seed = 0;
  Geometry geometry{32, 32, 3};
  int embed_dim = 64;
  /// Std of the projection weights is gain / sqrt(pixel count).
  double gain = 0.35;
  /// tanh after the projection.
  bool squash = true;
  /// l2-normalize embeddings.
  bool normalize = true;
};

/// Deterministic dual encoder with exact gradients.
///
/// Image path: z = W (x - mean) / std, h = tanh(z), e = h / |h|.
/// Text path: mean over tokens of tanh(W g_t / std), then l2-normalized,
/// where g_t is the token's glyph scaled by toy::kGlyphAmplitude. The mask
/// token contributes a zero vector to the mean. Text and images built from
/// the same glyphs therefore land close together.
class ToyDualEncoder final : public EncoderBundle {
 public:
  static constexpr double kPixelMean = 0.5;
  static constexpr double kPixelStd = 0.25;

  explicit ToyDualEncoder(ToyEncoderOptions options = {});

  [[nodiscard]] std::string name() const override;
  [[nodiscard]] Geometry input_geometry() const override { return options_.geometry; }
  [[nodiscard]] int embed_dim() const override { return options_.embed_dim; }

  using EncoderBundle::encode_image;
  using EncoderBundle::encode_text;
  [[nodiscard]] Eigen::MatrixXd encode_image(std::span<const Tensor> batch) const override;
  [[nodiscard]] Eigen::MatrixXd encode_text(std::span<const Tokens> batch) const override;
  [[nodiscard]] ImageGradient grad_image(const EmbeddingLoss& loss, std::span<const Tensor> batch) const override;

  /// E x (H*W*C) projection.
  [[nodiscard]] const Eigen::MatrixXd& weights() const { return weights_; }
  [[nodiscard]] const ToyEncoderOptions& options() const { return options_; }
  /// Per-token vector before pooling (zero for the mask token).
  [[nodiscard]] Eigen::VectorXd token_vector(const std::string& token) const;

 private:
  [[nodiscard]] Eigen::MatrixXd stack(std::span<const Tensor> batch) const;

  ToyEncoderOptions options_;
  Eigen::MatrixXd weights_;
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, Eigen::VectorXd> token_cache_;
};

}  // namespace uapforge
