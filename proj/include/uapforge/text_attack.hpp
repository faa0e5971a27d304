#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uapforge/dataset.hpp"
#include "uapforge/model_adapter.hpp"
#include "uapforge/objectives.hpp"

namespace uapforge {

/// How inter-sentence influence picks the slot a candidate is written into.
enum class SubstitutionPositions {
  Random,     // one uniformly drawn position per host sentence
  Exhaustive  // average over every position of the host sentence
};

enum class TriggerPolicy { Random, Importance };

struct TextAttackConfig {
  int top_k = 3;           // candidates kept per sentence
  int sample_count = 32;   // host sentences per candidate and pass
  int passes = 15;         // M_T
  SubstitutionPositions positions = SubstitutionPositions::Random;
  DivergenceConfig divergence;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ScoredToken {
  std::string token;
  double score = 0.0;
  friend bool operator==(const ScoredToken&, const ScoredToken&) = default;
};

/// Candidates sorted by (score desc, token asc).
struct TriggerLexicon {
  std::vector<ScoredToken> ranked;
};

struct TextTrigger {
  std::string token;
  int budget = 1;
  TriggerPolicy policy = TriggerPolicy::Importance;
};

/// Clean reference embeddings of every caption-expanded pair of a corpus.
class CorpusIndex {
 public:
  CorpusIndex(const PairedDataset& corpus, const EncoderBundle& bundle);

  [[nodiscard]] const std::vector<CaptionPair>& pairs() const { return pairs_; }
  [[nodiscard]] const Eigen::VectorXd& image_embedding(std::size_t pair) const { return image_emb_[pair]; }
  [[nodiscard]] const Eigen::VectorXd& text_embedding(std::size_t pair) const { return text_emb_[pair]; }

 private:
  std::vector<CaptionPair> pairs_;
  std::vector<Eigen::VectorXd> image_emb_;
  std::vector<Eigen::VectorXd> text_emb_;
};

/// Score of each position: with y' = caption with that token masked,
/// l(f_T(y'), f_T(y)) + l(f_T(y'), f_I(x)).
std::vector<double> word_importance(const ImageSample& image, const Tokens& caption, const EncoderBundle& bundle,
                                    const DivergenceConfig& cfg);
std::vector<double> word_importance(const Eigen::VectorXd& image_embedding, const Tokens& caption,
                                    const EncoderBundle& bundle, const DivergenceConfig& cfg);

/// Positions of the k highest scores; ties go to the earlier position.
std::vector<std::size_t> intra_topk(std::span<const double> scores, int k);

/// Mean substitution discrepancy of `candidate` over up to `sample_count`
/// random host sentences that do not already contain it.
double inter_influence(const std::string& candidate, const CorpusIndex& index, const EncoderBundle& bundle,
                       const TextAttackConfig& cfg, Rng& rng, int sample_count);
double inter_influence(const std::string& candidate, const PairedDataset& corpus, const EncoderBundle& bundle,
                       const TextAttackConfig& cfg, Rng& rng, int sample_count);

/// Discrepancy of one substituted caption against its original pair.
double substitution_score(const Tokens& substituted, const Eigen::VectorXd& text_embedding,
                          const Eigen::VectorXd& image_embedding, const EncoderBundle& bundle,
                          const DivergenceConfig& cfg);

/// Intra-sentence candidates, inter-sentence scoring averaged over passes,
/// ranked. Candidates that occur in every sentence cannot be scored and rank
/// with score 0.
TriggerLexicon mine_triggers(const PairedDataset& corpus, const EncoderBundle& bundle, const TextAttackConfig& cfg);

/// Replaces exactly `trigger.budget` positions holding a token different from
/// the trigger. The importance policy needs the paired image and a bundle.
Tokens apply_trigger(const Tokens& caption, const TextTrigger& trigger, Rng& rng, const ImageSample* image = nullptr,
                     const EncoderBundle* bundle = nullptr, const DivergenceConfig& cfg = {});

std::string to_string(TriggerPolicy p);
TriggerPolicy parse_trigger_policy(const std::string& s);
std::string to_string(SubstitutionPositions p);
SubstitutionPositions parse_substitution_positions(const std::string& s);

}  // namespace uapforge
