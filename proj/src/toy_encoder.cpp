#include "uapforge/toy_encoder.hpp"

#include <cmath>

#include "uapforge/errors.hpp"
#include "uapforge/rng.hpp"
#include "uapforge/toy_world.hpp"

namespace uapforge {

ToyDualEncoder::ToyDualEncoder(ToyEncoderOptions options) : options_(options) {
  if (!options_.geometry.valid()) throw ParameterError("toy encoder geometry must be non-empty");
  if (options_.embed_dim < 2) throw ParameterError("toy encoder embedding dimension must be >= 2");
  const auto d = static_cast<Eigen::Index>(options_.geometry.size());
  Rng rng = derive_stream(options_.seed, "toy-encoder-weights");
  std::normal_distribution<double> normal(0.0, options_.gain / std::sqrt(static_cast<double>(d)));
  weights_.resize(options_.embed_dim, d);
  // column-major fill order is part of the seed contract
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) weights_(i, j) = normal(rng);
  }
}

std::string ToyDualEncoder::name() const {
  return "toy:seed=" + std::to_string(options_.seed) + ",dim=" + std::to_string(options_.embed_dim) +
         ",size=" + options_.geometry.str();
}

Eigen::MatrixXd ToyDualEncoder::stack(std::span<const Tensor> batch) const {
  check_image_batch(batch, options_.geometry);
  Eigen::MatrixXd x(weights_.cols(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    x.col(static_cast<Eigen::Index>(b)) = (batch[b].values.array() - kPixelMean) / kPixelStd;
  }
  return x;
}

namespace {

// Columns of `h` become unit rows of the result (zero columns stay zero).
Eigen::MatrixXd rows_normalized(const Eigen::MatrixXd& h, bool normalize) {
  Eigen::MatrixXd e = h.transpose();
  if (!normalize) return e;
  for (Eigen::Index b = 0; b < e.rows(); ++b) {
    const double n = e.row(b).norm();
    if (n > 0.0) e.row(b) /= n;
  }
  return e;
}

}  // namespace

Eigen::MatrixXd ToyDualEncoder::encode_image(std::span<const Tensor> batch) const {
  Eigen::MatrixXd z = weights_ * stack(batch);
  if (options_.squash) z = z.array().tanh().matrix();
  return rows_normalized(z, options_.normalize);
}

Eigen::VectorXd ToyDualEncoder::token_vector(const std::string& token) const {
  if (token == kMaskToken) return Eigen::VectorXd::Zero(options_.embed_dim);
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = token_cache_.find(token); it != token_cache_.end()) return it->second;
  }
  const Tensor glyph = toy::token_glyph(token, options_.geometry);
  Eigen::VectorXd v = weights_ * (glyph.values * (toy::kGlyphAmplitude / kPixelStd));
  if (options_.squash) v = v.array().tanh().matrix();
  std::lock_guard lock(cache_mutex_);
  return token_cache_.emplace(token, std::move(v)).first->second;
}

Eigen::MatrixXd ToyDualEncoder::encode_text(std::span<const Tokens> batch) const {
  if (batch.empty()) throw ContractError("encode_text needs a non-empty batch");
  Eigen::MatrixXd h(options_.embed_dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].empty()) throw ContractError("encode_text got an empty caption");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(options_.embed_dim);
    for (const auto& tok : batch[b]) acc += token_vector(tok);
    h.col(static_cast<Eigen::Index>(b)) = acc / static_cast<double>(batch[b].size());
  }
  return rows_normalized(h, options_.normalize);
}

ImageGradient ToyDualEncoder::grad_image(const EmbeddingLoss& loss, std::span<const Tensor> batch) const {
  const Eigen::MatrixXd x = stack(batch);
  const Eigen::MatrixXd z = weights_ * x;
  const Eigen::MatrixXd h = options_.squash ? Eigen::MatrixXd(z.array().tanh().matrix()) : z;
  const Eigen::MatrixXd e = rows_normalized(h, options_.normalize);

  const EmbeddingLossValue lv = evaluate_embedding_loss(loss, e);
  Eigen::MatrixXd dh = lv.gradient.transpose();  // E x B
  if (options_.normalize) {
    for (Eigen::Index b = 0; b < dh.cols(); ++b) {
      const double n = h.col(b).norm();
      if (n == 0.0) {
        dh.col(b).setZero();
        continue;
      }
      const Eigen::VectorXd eb = e.row(b).transpose();
      dh.col(b) = (dh.col(b) - eb * eb.dot(dh.col(b))) / n;
    }
  }
  if (options_.squash) dh = (dh.array() * (1.0 - h.array().square())).matrix();
  const Eigen::MatrixXd dx = (weights_.transpose() * dh) / kPixelStd;

  ImageGradient out;
  out.value = lv.value;
  out.pixels.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.pixels.emplace_back(options_.geometry, dx.col(static_cast<Eigen::Index>(b)));
  }
  return out;
}

}  // namespace uapforge
