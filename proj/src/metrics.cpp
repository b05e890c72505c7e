#include "ccgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "ccgen/common.hpp"

namespace ccgen {

namespace {

constexpr char kSep = '\x1f';

std::string join(std::span<const std::string> toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s.push_back(kSep);
    s += toks[i];
  }
  return s;
}

// n-gram -> count for a single order.
std::unordered_map<std::string, double> order_counts(std::span<const std::string> toks, std::size_t n) {
  std::unordered_map<std::string, double> out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) out[join(toks.subspan(i, n))] += 1.0;
  return out;
}

}  // namespace

std::vector<std::string> unique_ngrams(std::span<const std::string> tokens, std::size_t n_max) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  for (std::size_t n = 1; n <= n_max; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      auto g = join(tokens.subspan(i, n));
      if (seen.insert(g).second) out.push_back(std::move(g));
    }
  }
  return out;
}

Overlap ngram_overlap(std::span<const std::string> ref, std::span<const std::string> cand, std::size_t n_max) {
  if (ref.empty() || cand.empty()) throw ValidationError("ngram_overlap: empty sentence");
  const std::size_t n = std::min({n_max, ref.size(), cand.size()});
  const auto r = unique_ngrams(ref, n);
  const auto c = unique_ngrams(cand, n);
  const std::unordered_set<std::string> rset(r.begin(), r.end());
  std::size_t overlap = 0;
  for (const auto& g : c) overlap += rset.count(g);
  Overlap o;
  o.ppv = static_cast<double>(overlap) / static_cast<double>(c.size());
  o.sens = static_cast<double>(overlap) / static_cast<double>(r.size());
  o.f1 = (o.ppv + o.sens) > 0.0 ? 2.0 * o.ppv * o.sens / (o.ppv + o.sens) : 0.0;
  return o;
}

IdfTable IdfTable::build(std::span<const TokenList> references, std::size_t n_max) {
  if (references.empty()) throw ValidationError("build_idf: empty reference corpus");
  IdfTable t;
  t.corpus_size_ = references.size();
  t.by_order_.resize(n_max);
  for (const auto& ref : references) {
    for (std::size_t n = 1; n <= n_max; ++n) {
      for (const auto& [g, _] : order_counts(ref, n)) ++t.by_order_[n - 1][g];
    }
  }
  return t;
}

std::size_t IdfTable::df(std::span<const std::string> ngram) const {
  if (ngram.empty() || ngram.size() > by_order_.size()) return 0;
  const auto& m = by_order_[ngram.size() - 1];
  const auto it = m.find(join(ngram));
  return it == m.end() ? 0 : it->second;
}

double IdfTable::idf(std::span<const std::string> ngram) const {
  return idf_key(ngram.size(), join(ngram));
}

double IdfTable::idf_key(std::size_t n, const std::string& key) const {
  std::size_t d = 0;
  if (n >= 1 && n <= by_order_.size()) {
    const auto it = by_order_[n - 1].find(key);
    if (it != by_order_[n - 1].end()) d = it->second;
  }
  return std::log(static_cast<double>(corpus_size_) / static_cast<double>(std::max<std::size_t>(d, 1)));
}

double cider_score(std::span<const std::string> ref, std::span<const std::string> cand, const IdfTable& idf,
                   std::size_t n_max) {
  if (ref.empty() || cand.empty()) throw ValidationError("cider_score: empty sentence");
  const std::size_t n_eff = std::min({n_max, ref.size(), cand.size()});
  double total = 0.0;
  for (std::size_t n = 1; n <= n_eff; ++n) {
    auto weights = [&](std::span<const std::string> toks) {
      auto counts = order_counts(toks, n);
      const double grams = static_cast<double>(toks.size() - n + 1);
      for (auto& [g, v] : counts) v = (v / grams) * idf.idf_key(n, g);
      return counts;
    };
    const auto wr = weights(ref);
    const auto wc = weights(cand);
    double dot = 0.0, nr = 0.0, nc = 0.0;
    for (const auto& [g, v] : wr) {
      nr += v * v;
      const auto it = wc.find(g);
      if (it != wc.end()) dot += v * it->second;
    }
    for (const auto& [g, v] : wc) nc += v * v;
    if (nr > 0.0 && nc > 0.0) total += dot / (std::sqrt(nr) * std::sqrt(nc));
  }
  return total / static_cast<double>(n_eff);
}

EmbeddingTable::EmbeddingTable(std::span<const std::string> tokens, nn::Matrix<float> vecs) : vectors(std::move(vecs)) {
  if (static_cast<std::size_t>(vectors.rows()) != tokens.size()) {
    throw ValidationError("embedding table: token count does not match vector rows");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) index.emplace(tokens[i], i);
}

const float* EmbeddingTable::find(const std::string& token) const {
  const auto it = index.find(token);
  if (it == index.end()) return nullptr;
  return vectors.row(static_cast<Eigen::Index>(it->second)).data();
}

std::optional<nn::RowVector<double>> sentence_embedding(std::span<const std::string> tokens,
                                                        const EmbeddingTable& table) {
  nn::RowVector<double> sum = nn::RowVector<double>::Zero(table.vectors.cols());
  std::size_t m = 0;
  for (const auto& t : tokens) {
    const auto it = table.index.find(t);
    if (it == table.index.end()) continue;
    sum += table.vectors.row(static_cast<Eigen::Index>(it->second)).cast<double>();
    ++m;
  }
  if (m == 0) return std::nullopt;
  return nn::RowVector<double>(sum / static_cast<double>(m));
}

std::optional<double> embedding_similarity(std::span<const std::string> ref, std::span<const std::string> cand,
                                           const EmbeddingTable& table) {
  const auto vr = sentence_embedding(ref, table);
  const auto vc = sentence_embedding(cand, table);
  if (!vr || !vc) return std::nullopt;
  const double nr = vr->norm();
  const double nc = vc->norm();
  if (nr == 0.0 || nc == 0.0) return std::nullopt;
  return std::clamp(vr->dot(*vc) / (nr * nc), -1.0, 1.0);
}

nlohmann::json MetricReport::to_json() const {
  return nlohmann::json{{"scheme", scheme}, {"ppv", ppv},   {"sens", sens},       {"f1", f1},
                        {"cider", cider},   {"es", es},     {"pairs", pairs},     {"es_flagged", es_flagged},
                        {"empty", empty}};
}

MetricReport corpus_report(const std::string& scheme, std::span<const TokenList> authentic,
                           std::span<const TokenList> synthetic, const EmbeddingTable& embeddings, const IdfTable& idf,
                           std::size_t n_max) {
  if (authentic.size() != synthetic.size()) {
    throw ValidationError("corpus_report: " + std::to_string(authentic.size()) + " authentic vs " +
                          std::to_string(synthetic.size()) + " synthetic sentences");
  }
  MetricReport rep;
  rep.scheme = scheme;
  rep.pairs = authentic.size();
  double es_sum = 0.0;
  std::size_t es_n = 0;
  for (std::size_t i = 0; i < authentic.size(); ++i) {
    const auto& r = authentic[i];
    const auto& c = synthetic[i];
    if (r.empty() || c.empty()) {
      ++rep.empty;
      ++rep.es_flagged;
      continue;
    }
    const auto o = ngram_overlap(r, c, n_max);
    rep.ppv += o.ppv;
    rep.sens += o.sens;
    rep.f1 += o.f1;
    rep.cider += cider_score(r, c, idf, n_max);
    if (const auto es = embedding_similarity(r, c, embeddings)) {
      es_sum += *es;
      ++es_n;
    } else {
      ++rep.es_flagged;
    }
  }
  if (rep.pairs > 0) {
    const double n = static_cast<double>(rep.pairs);
    rep.ppv /= n;
    rep.sens /= n;
    rep.f1 /= n;
    rep.cider /= n;
  }
  rep.es = es_n ? es_sum / static_cast<double>(es_n) : 0.0;
  return rep;
}

std::string format_report_table(std::span<const MetricReport> rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s %8s %8s %8s\n", "scheme", "ppv", "sens", "f1", "cider", "es",
                "pairs");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %8.4f %8.4f %8.4f %8.4f %8.4f %8zu\n", r.scheme.c_str(), r.ppv, r.sens, r.f1,
                  r.cider, r.es, r.pairs);
    os << buf;
  }
  return os.str();
}

NoveltyReport novelty_report(std::span<const std::string> generated, std::span<const std::string> training) {
  const std::unordered_set<std::string> gen(generated.begin(), generated.end());
  const std::unordered_set<std::string> train(training.begin(), training.end());
  NoveltyReport r;
  r.unique = gen.size();
  for (const auto& s : gen) r.novel += train.count(s) ? 0 : 1;
  return r;
}

}  // namespace ccgen
