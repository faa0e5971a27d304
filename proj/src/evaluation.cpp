#include "uapforge/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "uapforge/errors.hpp"
#include "uapforge/resample.hpp"

namespace uapforge {

RetrievalIndex build_index(const EncoderBundle& bundle, const PairedDataset& dataset, const AttackSpec& attack) {
  const Geometry& g = bundle.input_geometry();
  require_geometry(g, dataset.geometry(), "dataset vs adapter input");
  std::optional<Eigen::VectorXd> delta;
  if (attack.uap) {
    attack.uap->validate();
    const ImageUAP fitted = attack.uap->geometry == g ? *attack.uap : resize_uap(*attack.uap, g);
    delta = fitted.delta.cast<double>();
  }

  RetrievalIndex index;
  std::vector<Tensor> images;
  std::vector<Tokens> captions;
  images.reserve(dataset.n());
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const CaptionedImage& item = dataset.items()[i];
    images.push_back(delta ? clip_unit(item.image.pixels, *delta) : item.image.pixels);
    index.image_texts.emplace_back();
    for (const Tokens& cap : item.captions) {
      const std::size_t t = captions.size();
      index.image_texts.back().push_back(t);
      index.text_owner.push_back(i);
      if (attack.trigger) {
        Rng rng = derive_stream(attack.seed, "eval-trigger", t);
        captions.push_back(apply_trigger(cap, *attack.trigger, rng, &item.image, &bundle, attack.divergence));
      } else {
        captions.push_back(cap);
      }
    }
  }
  index.image_embeddings = bundle.encode_image(images);
  index.text_embeddings = bundle.encode_text(captions);
  return index;
}

Eigen::MatrixXd cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw ShapeError("cosine_similarity: embedding widths differ");
  auto normalized = [](Eigen::MatrixXd m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double n = m.row(r).norm();
      if (n > 0.0) m.row(r) /= n;
    }
    return m;
  };
  return normalized(a) * normalized(b).transpose();
}

namespace {

// Position of `target` in a descending ranking of `scores`, lower index first on ties.
template <typename Row>
std::size_t rank_of(const Row& scores, Eigen::Index target) {
  const double s = scores[target];
  std::size_t rank = 0;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    if (scores[j] > s || (scores[j] == s && j < target)) ++rank;
  }
  return rank;
}

void check_k(int k, Eigen::Index gallery) {
  if (k < 1) throw ParameterError("K must be >= 1");
  if (k > gallery) {
    throw ParameterError("K = " + std::to_string(k) + " exceeds the gallery size " + std::to_string(gallery));
  }
}

}  // namespace

std::vector<bool> i2t_hits(const Eigen::MatrixXd& similarity, const std::vector<std::vector<std::size_t>>& image_texts,
                           int k) {
  check_k(k, similarity.cols());
  std::vector<bool> hits(static_cast<std::size_t>(similarity.rows()), false);
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    const Eigen::VectorXd row = similarity.row(i).transpose();
    for (std::size_t t : image_texts[static_cast<std::size_t>(i)]) {
      if (rank_of(row, static_cast<Eigen::Index>(t)) < static_cast<std::size_t>(k)) {
        hits[static_cast<std::size_t>(i)] = true;
        break;
      }
    }
  }
  return hits;
}

std::vector<bool> t2i_hits(const Eigen::MatrixXd& similarity, const std::vector<std::size_t>& text_owner, int k) {
  check_k(k, similarity.rows());
  std::vector<bool> hits(static_cast<std::size_t>(similarity.cols()), false);
  for (Eigen::Index t = 0; t < similarity.cols(); ++t) {
    const Eigen::VectorXd col = similarity.col(t);
    hits[static_cast<std::size_t>(t)] =
        rank_of(col, static_cast<Eigen::Index>(text_owner[static_cast<std::size_t>(t)])) < static_cast<std::size_t>(k);
  }
  return hits;
}

double recall_percent(const std::vector<bool>& hits) {
  if (hits.empty()) return 0.0;
  return 100.0 * static_cast<double>(std::count(hits.begin(), hits.end(), true)) / static_cast<double>(hits.size());
}

std::optional<double> asr_percent(const std::vector<bool>& clean_hits, const std::vector<bool>& adversarial_hits) {
  if (clean_hits.size() != adversarial_hits.size()) throw ShapeError("asr: query counts differ");
  std::size_t correct = 0;
  std::size_t fooled = 0;
  for (std::size_t q = 0; q < clean_hits.size(); ++q) {
    if (!clean_hits[q]) continue;
    ++correct;
    if (!adversarial_hits[q]) ++fooled;
  }
  if (correct == 0) return std::nullopt;
  return 100.0 * static_cast<double>(fooled) / static_cast<double>(correct);
}

namespace {

struct Hits {
  std::vector<bool> i2t;
  std::vector<bool> t2i;
};

Hits hits_of(const RetrievalIndex& index, int k) {
  const Eigen::MatrixXd sim = cosine_similarity(index.image_embeddings, index.text_embeddings);
  return {i2t_hits(sim, index.image_texts, k), t2i_hits(sim, index.text_owner, k)};
}

}  // namespace

DirectionScores retrieval_recall(const EncoderBundle& bundle, const PairedDataset& dataset, int k,
                                 const AttackSpec& attack) {
  check_k(k, static_cast<Eigen::Index>(dataset.n()));
  const Hits h = hits_of(build_index(bundle, dataset, attack), k);
  return {recall_percent(h.i2t), recall_percent(h.t2i)};
}

DirectionAsr attack_success_rate(const EncoderBundle& bundle, const PairedDataset& dataset, const AttackSpec& attack,
                                 int k) {
  check_k(k, static_cast<Eigen::Index>(dataset.n()));
  const Hits clean = hits_of(build_index(bundle, dataset), k);
  const Hits adv = hits_of(build_index(bundle, dataset, attack), k);
  return {asr_percent(clean.i2t, adv.i2t), asr_percent(clean.t2i, adv.t2i)};
}

ImageUAP resize_uap(const ImageUAP& uap, const Geometry& target) {
  if (!target.valid()) throw ParameterError("resize target must be non-empty, got " + target.str());
  if (target == uap.geometry) return uap;
  const BilinearResampler r(uap.geometry, target);
  const Eigen::VectorXd v = r.apply(Eigen::VectorXd(uap.delta.cast<double>()));
  ImageUAP out{target, Eigen::VectorXf(v.size()), uap.epsilon};
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.delta[i] = std::clamp(static_cast<float>(v[i]), -uap.epsilon, uap.epsilon);
  }
  return out;
}

AttackReport evaluate_attack(const EncoderBundle& bundle, const PairedDataset& dataset, const AttackSpec& attack,
                             const std::vector<int>& ks) {
  if (ks.empty()) throw ParameterError("evaluation needs at least one K");
  for (int k : ks) check_k(k, static_cast<Eigen::Index>(dataset.n()));
  AttackReport report;
  report.adapter = bundle.name();
  report.ks = ks;
  const RetrievalIndex clean_index = build_index(bundle, dataset);
  const RetrievalIndex adv_index = build_index(bundle, dataset, attack);
  for (int k : ks) {
    const Hits clean = hits_of(clean_index, k);
    const Hits adv = hits_of(adv_index, k);
    report.clean[k] = {recall_percent(clean.i2t), recall_percent(clean.t2i)};
    report.adversarial[k] = {recall_percent(adv.i2t), recall_percent(adv.t2i)};
    report.asr[k] = {asr_percent(clean.i2t, adv.i2t), asr_percent(clean.t2i, adv.t2i)};
  }
  return report;
}

std::string render_report(const AttackReport& report) {
  std::ostringstream os;
  os << "adapter: " << report.adapter << "\n";
  if (!report.config_digest.empty()) os << "config:  " << report.config_digest << "\n";
  os << std::left << std::setw(6) << "K" << std::right << std::setw(12) << "I2T R@K" << std::setw(12) << "adv"
     << std::setw(10) << "ASR" << std::setw(12) << "T2I R@K" << std::setw(12) << "adv" << std::setw(10) << "ASR"
     << "\n";
  auto fmt_asr = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(2) << *v;
    } else {
      s << "n/a";
    }
    return s.str();
  };
  os << std::fixed << std::setprecision(2);
  for (int k : report.ks) {
    const auto& c = report.clean.at(k);
    const auto& a = report.adversarial.at(k);
    const auto& s = report.asr.at(k);
    os << std::left << std::setw(6) << k << std::right << std::setw(12) << c.i2t << std::setw(12) << a.i2t
       << std::setw(10) << fmt_asr(s.i2t) << std::setw(12) << c.t2i << std::setw(12) << a.t2i << std::setw(10)
       << fmt_asr(s.t2i) << "\n";
  }
  return os.str();
}

}  // namespace uapforge
