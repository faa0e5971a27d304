#pragma once

// Exhaustive trigger search: every vocabulary word, every host sentence
// that lacks it, every position of that sentence.

#include <algorithm>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "uapforge/dataset.hpp"
#include "uapforge/model_adapter.hpp"

namespace oracle {

struct OracleScore {
  std::string token;
  double score = 0.0;
};

inline double exhaustive_influence(const std::string& word, const uapforge::PairedDataset& corpus,
                                   const uapforge::EncoderBundle& bundle) {
  double total = 0.0;
  int hosts = 0;
  for (const auto& item : corpus.items()) {
    const Eigen::VectorXd fi = bundle.encode_image(item.image.pixels);
    for (const auto& cap : item.captions) {
      if (std::find(cap.begin(), cap.end(), word) != cap.end()) continue;
      const Eigen::VectorXd ft = bundle.encode_text(cap);
      double host = 0.0;
      for (std::size_t j = 0; j < cap.size(); ++j) {
        uapforge::Tokens sub = cap;
        sub[j] = word;
        const Eigen::VectorXd fs = bundle.encode_text(sub);
        host += kl_softmax(fs, ft) + kl_softmax(fs, fi);
      }
      total += host / static_cast<double>(cap.size());
      ++hosts;
    }
  }
  return hosts == 0 ? 0.0 : total / hosts;
}

/// Every vocabulary word scored, sorted by (score desc, token asc).
inline std::vector<OracleScore> exhaustive_ranking(const uapforge::PairedDataset& corpus,
                                                   const uapforge::EncoderBundle& bundle) {
  std::vector<OracleScore> out;
  for (const std::string& w : corpus.vocabulary()) out.push_back({w, exhaustive_influence(w, corpus, bundle)});
  std::sort(out.begin(), out.end(), [](const OracleScore& a, const OracleScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  return out;
}

/// Importance of each position by masking it, computed one caption at a time.
inline std::vector<double> brute_importance(const Eigen::VectorXd& fi, const uapforge::Tokens& cap,
                                            const uapforge::EncoderBundle& bundle) {
  const Eigen::VectorXd ft = bundle.encode_text(cap);
  std::vector<double> out;
  for (std::size_t j = 0; j < cap.size(); ++j) {
    uapforge::Tokens masked = cap;
    masked[j] = "<mask>";
    const Eigen::VectorXd fm = bundle.encode_text(masked);
    out.push_back(kl_softmax(fm, ft) + kl_softmax(fm, fi));
  }
  return out;
}

}  // namespace oracle
