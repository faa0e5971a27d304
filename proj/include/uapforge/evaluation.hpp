#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uapforge/dataset.hpp"
#include "uapforge/model_adapter.hpp"
#include "uapforge/optimizer.hpp"
#include "uapforge/text_attack.hpp"

namespace uapforge {

/// Embeddings of every image and every caption of a corpus plus ground truth.
struct RetrievalIndex {
  Eigen::MatrixXd image_embeddings;  // N x E
  Eigen::MatrixXd text_embeddings;   // M x E
  std::vector<std::size_t> text_owner;                // caption -> image
  std::vector<std::vector<std::size_t>> image_texts;  // image -> captions
};

/// Attack applied while building an index. Images become clip(x + delta)
/// (delta resized to the adapter geometry if needed); captions pass through
/// apply_trigger with a per-caption stream derived from `seed`.
struct AttackSpec {
  const ImageUAP* uap = nullptr;
  const TextTrigger* trigger = nullptr;
  std::uint64_t seed = 0;
  DivergenceConfig divergence;
};

RetrievalIndex build_index(const EncoderBundle& bundle, const PairedDataset& dataset, const AttackSpec& attack = {});

/// Row-normalized A * row-normalized B^T.
Eigen::MatrixXd cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Per-image: does any ground-truth caption rank within the top K?
/// Ties rank the lower index first.
std::vector<bool> i2t_hits(const Eigen::MatrixXd& similarity, const std::vector<std::vector<std::size_t>>& image_texts,
                           int k);
/// Per-caption: does its image rank within the top K? `similarity` is N x M.
std::vector<bool> t2i_hits(const Eigen::MatrixXd& similarity, const std::vector<std::size_t>& text_owner, int k);

struct DirectionScores {
  double i2t = 0.0;
  double t2i = 0.0;
};

struct DirectionAsr {
  std::optional<double> i2t;  // empty when no query was correct on clean data
  std::optional<double> t2i;
};

/// Percentage of true entries.
double recall_percent(const std::vector<bool>& hits);
/// 100 * |clean-correct and adversarially wrong| / |clean-correct|.
std::optional<double> asr_percent(const std::vector<bool>& clean_hits, const std::vector<bool>& adversarial_hits);

/// R@K in percent for both directions.
DirectionScores retrieval_recall(const EncoderBundle& bundle, const PairedDataset& dataset, int k,
                                 const AttackSpec& attack = {});

DirectionAsr attack_success_rate(const EncoderBundle& bundle, const PairedDataset& dataset, const AttackSpec& attack,
                                 int k);

/// Bilinear resize to `target` (same channel count); the budget is carried
/// over and still holds.
ImageUAP resize_uap(const ImageUAP& uap, const Geometry& target);

struct AttackReport {
  std::string adapter;
  std::string config_digest;
  std::vector<int> ks;
  std::map<int, DirectionScores> clean;
  std::map<int, DirectionScores> adversarial;
  std::map<int, DirectionAsr> asr;
};

AttackReport evaluate_attack(const EncoderBundle& bundle, const PairedDataset& dataset, const AttackSpec& attack,
                             const std::vector<int>& ks);

/// Plain-text table of R@K and ASR@K per direction.
std::string render_report(const AttackReport& report);

}  // namespace uapforge
