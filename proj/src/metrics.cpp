#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace tslstm {
namespace metrics {

namespace {

using Counts = std::unordered_map<std::string, double>;

std::string ngram_key(const TokenList& tokens, std::size_t start, int n) {
  std::string key = tokens[start];
  for (int k = 1; k < n; ++k) {
    key += '\x1f';
    key += tokens[start + k];
  }
  return key;
}

Counts ngram_counts(const TokenList& tokens, int n) {
  Counts out;
  if (static_cast<int>(tokens.size()) >= n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      out[ngram_key(tokens, i, n)] += 1.0;
    }
  }
  return out;
}

void validate_corpus(const std::vector<TokenList>& candidates,
                     const std::vector<RefSet>& references) {
  if (candidates.empty()) throw MetricError("empty candidate list");
  if (candidates.size() != references.size()) {
    throw MetricError("candidate/reference count mismatch: " +
                      std::to_string(candidates.size()) + " vs " +
                      std::to_string(references.size()));
  }
  for (const RefSet& refs : references) {
    if (refs.empty()) throw MetricError("item with no references");
  }
}

}  // namespace

std::vector<double> bleu(const std::vector<TokenList>& candidates,
                         const std::vector<RefSet>& references, int max_n) {
  validate_corpus(candidates, references);

  std::vector<double> clipped(max_n, 0.0), total(max_n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t item = 0; item < candidates.size(); ++item) {
    const TokenList& cand = candidates[item];
    cand_len += static_cast<double>(cand.size());
    // Closest reference length, ties toward the shorter one.
    std::size_t closest = references[item][0].size();
    for (const TokenList& ref : references[item]) {
      const auto diff = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (diff(ref.size()) < diff(closest) ||
          (diff(ref.size()) == diff(closest) && ref.size() < closest)) {
        closest = ref.size();
      }
    }
    ref_len += static_cast<double>(closest);

    for (int n = 1; n <= max_n; ++n) {
      Counts cand_counts = ngram_counts(cand, n);
      Counts max_ref;
      for (const TokenList& ref : references[item]) {
        for (const auto& [key, count] : ngram_counts(ref, n)) {
          max_ref[key] = std::max(max_ref[key], count);
        }
      }
      for (const auto& [key, count] : cand_counts) {
        auto it = max_ref.find(key);
        clipped[n - 1] += std::min(count, it == max_ref.end() ? 0.0 : it->second);
      }
      if (cand.size() >= static_cast<std::size_t>(n)) {
        total[n - 1] += static_cast<double>(cand.size() - n + 1);
      }
    }
  }

  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  std::vector<double> out(max_n, 0.0);
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= max_n; ++n) {
    if (total[n - 1] == 0.0 || clipped[n - 1] == 0.0) zero = true;
    if (!zero) {
      log_sum += std::log(clipped[n - 1] / total[n - 1]);
      out[n - 1] = bp * std::exp(log_sum / n);
    }
  }
  return out;
}

double cider(const std::vector<TokenList>& candidates, const std::vector<RefSet>& references,
             int max_n) {
  validate_corpus(candidates, references);
  const double corpus_size = static_cast<double>(candidates.size());

  double score_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    // Document frequency over the reference corpus.
    Counts df;
    for (const RefSet& refs : references) {
      std::unordered_set<std::string> seen;
      for (const TokenList& ref : refs) {
        for (const auto& [key, count] : ngram_counts(ref, n)) seen.insert(key);
      }
      for (const auto& key : seen) df[key] += 1.0;
    }
    auto idf = [&](const std::string& key) {
      auto it = df.find(key);
      return std::log(corpus_size / std::max(it == df.end() ? 0.0 : it->second, 1.0));
    };
    auto weighted = [&](const Counts& counts) {
      Counts out;
      for (const auto& [key, count] : counts) out[key] = count * idf(key);
      return out;
    };
    auto norm = [](const Counts& v) {
      double s = 0.0;
      for (const auto& [key, x] : v) s += x * x;
      return std::sqrt(s);
    };
    auto dot = [](const Counts& a, const Counts& b) {
      double s = 0.0;
      for (const auto& [key, x] : a) {
        auto it = b.find(key);
        if (it != b.end()) s += x * it->second;
      }
      return s;
    };

    double per_n_sum = 0.0;
    for (std::size_t item = 0; item < candidates.size(); ++item) {
      Counts cand_raw = ngram_counts(candidates[item], n);
      Counts cand_vec = weighted(cand_raw);
      double ref_mean = 0.0;
      for (const TokenList& ref : references[item]) {
        Counts ref_raw = ngram_counts(ref, n);
        Counts ref_vec = weighted(ref_raw);
        double na = norm(cand_vec), nb = norm(ref_vec);
        const Counts* a = &cand_vec;
        const Counts* b = &ref_vec;
        if (na == 0.0 && nb == 0.0 && !cand_raw.empty() && !ref_raw.empty()) {
          // All weights vanished (every n-gram occurs in every document);
          // fall back to plain count vectors.
          a = &cand_raw;
          b = &ref_raw;
          na = norm(cand_raw);
          nb = norm(ref_raw);
        }
        if (na > 0.0 && nb > 0.0) ref_mean += dot(*a, *b) / (na * nb);
      }
      per_n_sum += ref_mean / static_cast<double>(references[item].size());
    }
    score_sum += per_n_sum / corpus_size;
  }
  return 10.0 * score_sum / max_n;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["metrics"] = {{"bleu1", bleu[0]}, {"bleu2", bleu[1]}, {"bleu3", bleu[2]},
                  {"bleu4", bleu[3]}, {"cider", cider}};
  j["config"] = {{"smoothing", "none"}, {"cider_variant", "cider"}, {"meteor", nullptr}};
  j["corpus_size"] = corpus_size;
  j["per_item"] = per_item;
  return j;
}

MetricReport evaluate(const std::map<std::string, std::string>& outputs, const Dataset& ds,
                      const std::vector<std::string>& split_ids) {
  std::vector<std::string> missing;
  for (const auto& id : split_ids) {
    if (!outputs.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string msg = "missing outputs for:";
    for (const auto& id : missing) msg += " " + id;
    throw MetricError(msg);
  }

  std::vector<TokenList> candidates;
  std::vector<RefSet> references;
  for (const auto& id : split_ids) {
    candidates.push_back(tokenize(outputs.at(id)));
    RefSet refs;
    for (const auto& caption : ds.video(id).captions) refs.push_back(tokenize(caption));
    references.push_back(std::move(refs));
  }

  MetricReport report;
  report.bleu = bleu(candidates, references, 4);
  report.cider = cider(candidates, references, 4);
  report.corpus_size = candidates.size();
  report.per_item = nlohmann::json::array();
  for (std::size_t i = 0; i < split_ids.size(); ++i) {
    std::vector<TokenList> one_cand{candidates[i]};
    std::vector<RefSet> one_ref{references[i]};
    report.per_item.push_back({{"id", split_ids[i]},
                               {"caption", outputs.at(split_ids[i])},
                               {"bleu4", bleu(one_cand, one_ref, 4)[3]},
                               {"cider", cider(one_cand, one_ref, 4)}});
  }
  return report;
}

}  // namespace metrics
}  // namespace tslstm
