#include "uapforge/text_attack.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "uapforge/errors.hpp"

namespace uapforge {

void TextAttackConfig::validate() const {
  if (top_k < 1) throw ParameterError("text top_k must be >= 1");
  if (sample_count < 1) throw ParameterError("text sample_count must be >= 1");
  if (passes < 1) throw ParameterError("text passes (M_T) must be >= 1");
  if (!(divergence.temperature > 0.0)) throw ParameterError("temperature must be > 0");
}

CorpusIndex::CorpusIndex(const PairedDataset& corpus, const EncoderBundle& bundle) : pairs_(expand_by_captions(corpus)) {
  std::vector<Tensor> images;
  for (const auto& item : corpus.items()) images.push_back(item.image.pixels);
  const Eigen::MatrixXd ie = bundle.encode_image(images);
  std::vector<Tokens> captions;
  captions.reserve(pairs_.size());
  for (const auto& p : pairs_) captions.push_back(*p.caption);
  const Eigen::MatrixXd te = bundle.encode_text(captions);
  std::size_t row = 0;
  for (std::size_t i = 0; i < corpus.items().size(); ++i) {
    for (std::size_t c = 0; c < corpus.items()[i].captions.size(); ++c, ++row) {
      image_emb_.push_back(ie.row(static_cast<Eigen::Index>(i)).transpose());
      text_emb_.push_back(te.row(static_cast<Eigen::Index>(row)).transpose());
    }
  }
}

std::vector<double> word_importance(const Eigen::VectorXd& image_embedding, const Tokens& caption,
                                    const EncoderBundle& bundle, const DivergenceConfig& cfg) {
  if (caption.empty()) throw ContractError("word_importance needs a non-empty caption");
  std::vector<Tokens> variants;
  variants.reserve(caption.size() + 1);
  variants.push_back(caption);
  for (std::size_t j = 0; j < caption.size(); ++j) {
    Tokens masked = caption;
    masked[j] = std::string(kMaskToken);
    variants.push_back(std::move(masked));
  }
  const Eigen::MatrixXd emb = bundle.encode_text(variants);
  const Eigen::VectorXd original = emb.row(0).transpose();
  std::vector<double> scores(caption.size());
  for (std::size_t j = 0; j < caption.size(); ++j) {
    const Eigen::VectorXd m = emb.row(static_cast<Eigen::Index>(j + 1)).transpose();
    scores[j] = divergence(m, original, cfg) + divergence(m, image_embedding, cfg);
  }
  return scores;
}

std::vector<double> word_importance(const ImageSample& image, const Tokens& caption, const EncoderBundle& bundle,
                                    const DivergenceConfig& cfg) {
  return word_importance(bundle.encode_image(image.pixels), caption, bundle, cfg);
}

std::vector<std::size_t> intra_topk(std::span<const double> scores, int k) {
  if (k < 1) throw ParameterError("top-k needs k >= 1");
  std::vector<std::size_t> pos(scores.size());
  std::iota(pos.begin(), pos.end(), 0);
  std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  pos.resize(std::min(pos.size(), static_cast<std::size_t>(k)));
  return pos;
}

double substitution_score(const Tokens& substituted, const Eigen::VectorXd& text_embedding,
                          const Eigen::VectorXd& image_embedding, const EncoderBundle& bundle,
                          const DivergenceConfig& cfg) {
  const Eigen::VectorXd e = bundle.encode_text(substituted);
  return divergence(e, text_embedding, cfg) + divergence(e, image_embedding, cfg);
}

namespace {

std::vector<std::size_t> eligible_hosts(const std::string& candidate, const CorpusIndex& index) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < index.pairs().size(); ++i) {
    const Tokens& cap = *index.pairs()[i].caption;
    if (std::find(cap.begin(), cap.end(), candidate) == cap.end()) out.push_back(i);
  }
  return out;
}

}  // namespace

double inter_influence(const std::string& candidate, const CorpusIndex& index, const EncoderBundle& bundle,
                       const TextAttackConfig& cfg, Rng& rng, int sample_count) {
  if (sample_count < 1) throw ParameterError("inter_influence needs sample_count >= 1");
  std::vector<std::size_t> hosts = eligible_hosts(candidate, index);
  if (hosts.empty()) {
    throw ContractError("no sentence in the corpus is eligible for candidate '" + candidate +
                        "' (it occurs in every caption)");
  }
  std::shuffle(hosts.begin(), hosts.end(), rng);
  hosts.resize(std::min(hosts.size(), static_cast<std::size_t>(sample_count)));

  // substituted captions for every host, then one batched encode
  std::vector<Tokens> variants;
  std::vector<std::size_t> owner;
  for (std::size_t h = 0; h < hosts.size(); ++h) {
    const Tokens& cap = *index.pairs()[hosts[h]].caption;
    if (cfg.positions == SubstitutionPositions::Random) {
      Tokens sub = cap;
      sub[std::uniform_int_distribution<std::size_t>(0, cap.size() - 1)(rng)] = candidate;
      variants.push_back(std::move(sub));
      owner.push_back(h);
    } else {
      for (std::size_t j = 0; j < cap.size(); ++j) {
        Tokens sub = cap;
        sub[j] = candidate;
        variants.push_back(std::move(sub));
        owner.push_back(h);
      }
    }
  }
  const Eigen::MatrixXd emb = bundle.encode_text(variants);
  std::vector<double> per_host(hosts.size(), 0.0);
  std::vector<int> counts(hosts.size(), 0);
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const std::size_t pair = hosts[owner[v]];
    const Eigen::VectorXd e = emb.row(static_cast<Eigen::Index>(v)).transpose();
    per_host[owner[v]] +=
        divergence(e, index.text_embedding(pair), cfg.divergence) + divergence(e, index.image_embedding(pair), cfg.divergence);
    ++counts[owner[v]];
  }
  double total = 0.0;
  for (std::size_t h = 0; h < hosts.size(); ++h) total += per_host[h] / counts[h];
  return total / static_cast<double>(hosts.size());
}

double inter_influence(const std::string& candidate, const PairedDataset& corpus, const EncoderBundle& bundle,
                       const TextAttackConfig& cfg, Rng& rng, int sample_count) {
  return inter_influence(candidate, CorpusIndex(corpus, bundle), bundle, cfg, rng, sample_count);
}

TriggerLexicon mine_triggers(const PairedDataset& corpus, const EncoderBundle& bundle, const TextAttackConfig& cfg) {
  cfg.validate();
  const CorpusIndex index(corpus, bundle);

  std::set<std::string> candidates;
  for (std::size_t i = 0; i < index.pairs().size(); ++i) {
    const Tokens& cap = *index.pairs()[i].caption;
    const std::vector<double> scores = word_importance(index.image_embedding(i), cap, bundle, cfg.divergence);
    for (std::size_t pos : intra_topk(scores, cfg.top_k)) candidates.insert(cap[pos]);
  }

  TriggerLexicon lex;
  for (const std::string& cand : candidates) {
    double score = 0.0;
    if (!eligible_hosts(cand, index).empty()) {
      for (int pass = 0; pass < cfg.passes; ++pass) {
        Rng rng = derive_stream(cfg.seed, "inter-influence:" + cand, static_cast<std::uint64_t>(pass));
        score += inter_influence(cand, index, bundle, cfg, rng, cfg.sample_count);
      }
      score /= cfg.passes;
    }
    lex.ranked.push_back({cand, score});
  }
  std::sort(lex.ranked.begin(), lex.ranked.end(), [](const ScoredToken& a, const ScoredToken& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  return lex;
}

Tokens apply_trigger(const Tokens& caption, const TextTrigger& trigger, Rng& rng, const ImageSample* image,
                     const EncoderBundle* bundle, const DivergenceConfig& cfg) {
  if (caption.empty()) throw ContractError("apply_trigger needs a non-empty caption");
  if (trigger.budget < 1) throw ParameterError("trigger budget must be >= 1");
  if (trigger.token.empty()) throw ContractError("trigger token is empty");
  std::vector<std::size_t> slots;
  for (std::size_t j = 0; j < caption.size(); ++j) {
    if (caption[j] != trigger.token) slots.push_back(j);
  }
  const auto budget = static_cast<std::size_t>(trigger.budget);
  if (slots.size() < budget) {
    throw ContractError("caption '" + join_tokens(caption) + "' has only " + std::to_string(slots.size()) +
                        " replaceable positions for budget " + std::to_string(budget));
  }
  std::vector<std::size_t> chosen;
  if (trigger.policy == TriggerPolicy::Random) {
    std::shuffle(slots.begin(), slots.end(), rng);
    chosen.assign(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(budget));
  } else {
    if (!image || !bundle) throw ContractError("importance trigger policy needs the paired image and an encoder");
    const std::vector<double> scores = word_importance(*image, caption, *bundle, cfg);
    std::stable_sort(slots.begin(), slots.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    chosen.assign(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(budget));
  }
  Tokens out = caption;
  for (std::size_t j : chosen) out[j] = trigger.token;
  return out;
}

std::string to_string(TriggerPolicy p) { return p == TriggerPolicy::Random ? "random" : "importance"; }

TriggerPolicy parse_trigger_policy(const std::string& s) {
  if (s == "random") return TriggerPolicy::Random;
  if (s == "importance") return TriggerPolicy::Importance;
  throw ConfigError("unknown trigger policy '" + s + "' (expected 'random' or 'importance')");
}

std::string to_string(SubstitutionPositions p) { return p == SubstitutionPositions::Random ? "random" : "exhaustive"; }

SubstitutionPositions parse_substitution_positions(const std::string& s) {
  if (s == "random") return SubstitutionPositions::Random;
  if (s == "exhaustive") return SubstitutionPositions::Exhaustive;
  throw ConfigError("unknown substitution positions '" + s + "' (expected 'random' or 'exhaustive')");
}

}  // namespace uapforge
