#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccgen/nn/tensor.hpp"

namespace ccgen {

using TokenList = std::vector<std::string>;

inline constexpr std::size_t kDefaultNgramMax = 4;

struct Overlap {
  double ppv = 0.0;
  double sens = 0.0;
  double f1 = 0.0;
};

// Unique 1..n-grams of a sentence, each encoded as its tokens joined by
// '\x1f'.
std::vector<std::string> unique_ngrams(std::span<const std::string> tokens, std::size_t n_max);

// Micro-averaged overlap of the pooled unique 1..n_eff-gram sets,
// n_eff = min(n_max, |ref|, |cand|). Throws ValidationError on an empty
// sentence.
Overlap ngram_overlap(std::span<const std::string> ref, std::span<const std::string> cand,
                      std::size_t n_max = kDefaultNgramMax);

// Document frequencies per n-gram order over a reference corpus.
class IdfTable {
 public:
  static IdfTable build(std::span<const TokenList> references, std::size_t n_max = kDefaultNgramMax);

  std::size_t corpus_size() const { return corpus_size_; }
  std::size_t n_max() const { return by_order_.size(); }
  // 0 for n-grams absent from the references.
  std::size_t df(std::span<const std::string> ngram) const;
  // ln(corpus_size / max(df, 1)).
  double idf(std::span<const std::string> ngram) const;
  // Same, for an n-gram already joined as in unique_ngrams.
  double idf_key(std::size_t n, const std::string& key) const;

 private:
  std::size_t corpus_size_ = 0;
  std::vector<std::unordered_map<std::string, std::size_t>> by_order_;
};

// Mean over n = 1..n_eff of the cosine between TF-IDF vectors (TF = count /
// number of n-grams of that order in the sentence). An order where either
// vector is zero contributes 0. Not scaled by 10.
double cider_score(std::span<const std::string> ref, std::span<const std::string> cand, const IdfTable& idf,
                   std::size_t n_max = kDefaultNgramMax);

// Word-vector lookup table used for embedding similarity.
struct EmbeddingTable {
  std::unordered_map<std::string, std::size_t> index;
  nn::Matrix<float> vectors;

  EmbeddingTable() = default;
  EmbeddingTable(std::span<const std::string> tokens, nn::Matrix<float> vectors);
  const float* find(const std::string& token) const;
};

// Mean of the vectors of in-table tokens; nullopt when none is in the table.
std::optional<nn::RowVector<double>> sentence_embedding(std::span<const std::string> tokens,
                                                        const EmbeddingTable& table);

// Cosine of the two sentence embeddings; nullopt when either is undefined or
// has zero norm.
std::optional<double> embedding_similarity(std::span<const std::string> ref, std::span<const std::string> cand,
                                           const EmbeddingTable& table);

struct MetricReport {
  std::string scheme;
  double ppv = 0.0;
  double sens = 0.0;
  double f1 = 0.0;
  double cider = 0.0;
  double es = 0.0;
  std::size_t pairs = 0;
  // Pairs without a defined ES (excluded from the ES mean).
  std::size_t es_flagged = 0;
  // Pairs with an empty sentence on either side; they score 0 on the overlap
  // metrics and CIDEr and are ES-flagged.
  std::size_t empty = 0;

  nlohmann::json to_json() const;
};

// Arithmetic means of per-pair scores over aligned lists.
MetricReport corpus_report(const std::string& scheme, std::span<const TokenList> authentic,
                           std::span<const TokenList> synthetic, const EmbeddingTable& embeddings, const IdfTable& idf,
                           std::size_t n_max = kDefaultNgramMax);

// Fixed-width table, columns ppv sens f1 cider es.
std::string format_report_table(std::span<const MetricReport> rows);

struct NoveltyReport {
  std::size_t unique = 0;
  std::size_t novel = 0;
};
NoveltyReport novelty_report(std::span<const std::string> generated, std::span<const std::string> training);

}  // namespace ccgen
