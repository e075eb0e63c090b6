#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "data.hpp"

namespace tslstm {
namespace metrics {

using TokenList = std::vector<std::string>;
using RefSet = std::vector<TokenList>;

// Corpus-level BLEU@1..max_n: clipped n-gram precisions aggregated over the
// corpus, geometric mean, brevity penalty with per-item closest reference
// length. No smoothing: a zero precision zeroes that order and above.
std::vector<double> bleu(const std::vector<TokenList>& candidates,
                         const std::vector<RefSet>& references, int max_n = 4);

// CIDEr with TF-IDF weighted n-gram cosine similarity, scaled by 10.
// IDF uses document frequency over the reference corpus; when both TF-IDF
// vectors vanish for an order (every n-gram in every document), cosine
// falls back to plain TF vectors.
double cider(const std::vector<TokenList>& candidates, const std::vector<RefSet>& references,
             int max_n = 4);

struct MetricReport {
  std::vector<double> bleu;  // B@1..B@4
  double cider = 0.0;
  nlohmann::json per_item;
  std::size_t corpus_size = 0;

  nlohmann::json to_json() const;
};

// Score decoded captions (id -> sentence) against the references of a
// dataset split. Every id in the split must be present.
MetricReport evaluate(const std::map<std::string, std::string>& outputs, const Dataset& ds,
                      const std::vector<std::string>& split_ids);

}  // namespace metrics
}  // namespace tslstm
