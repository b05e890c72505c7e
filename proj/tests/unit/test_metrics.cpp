#include <doctest.h>

#include <cmath>
#include <map>

#include "ccgen/common.hpp"
#include "ccgen/metrics.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/text.hpp"
#include "support/oracles.hpp"

using namespace ccgen;

namespace {

TokenList random_sentence(Rng& rng, std::size_t max_len, std::size_t alphabet) {
  TokenList s(1 + rng.below(max_len));
  for (auto& t : s) t = std::string(1, static_cast<char>('a' + rng.below(alphabet)));
  return s;
}

// TF-IDF cosine per order written out with maps of token vectors.
double brute_cider(const TokenList& ref, const TokenList& cand, const std::vector<TokenList>& corpus,
                   std::size_t n_max) {
  const auto n_eff = std::min({n_max, ref.size(), cand.size()});
  double total = 0.0;
  for (std::size_t n = 1; n <= n_eff; ++n) {
    auto tfidf = [&](const TokenList& s) {
      std::map<TokenList, double> w;
      for (std::size_t i = 0; i + n <= s.size(); ++i) w[TokenList(s.begin() + i, s.begin() + i + n)] += 1.0;
      for (auto& [g, v] : w) {
        double df = 0;
        for (const auto& doc : corpus) df += testing::ngram_set(doc, n).count(g) ? 1 : 0;
        v = v / static_cast<double>(s.size() - n + 1) * std::log(static_cast<double>(corpus.size()) / std::max(df, 1.0));
      }
      return w;
    };
    const auto a = tfidf(ref), b = tfidf(cand);
    double dot = 0, na = 0, nb = 0;
    for (const auto& [g, v] : a) {
      na += v * v;
      if (b.count(g)) dot += v * b.at(g);
    }
    for (const auto& [g, v] : b) nb += v * v;
    if (na > 0 && nb > 0) total += dot / std::sqrt(na * nb);
  }
  return total / static_cast<double>(n_eff);
}

}  // namespace

TEST_CASE("overlap hand examples") {
  const auto o = ngram_overlap(tokenize("a b c"), tokenize("a b d"));
  CHECK(o.ppv == 0.5);
  CHECK(o.sens == 0.5);
  CHECK(o.f1 == 0.5);
  const auto z = ngram_overlap(tokenize("heat stroke hypertension"), tokenize("biba came in hospital for evaluation"));
  CHECK(z.ppv == 0.0);
  CHECK(z.sens == 0.0);
  CHECK(z.f1 == 0.0);
  const auto same = ngram_overlap(tokenize("chest pain x 2 days"), tokenize("chest pain x 2 days"));
  CHECK(same.f1 == 1.0);
  CHECK_THROWS_AS(ngram_overlap(TokenList{}, tokenize("a")), ValidationError);
}

TEST_CASE("overlap equals the n-gram set oracle on random pairs") {
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto r = random_sentence(rng, 8, 4), c = random_sentence(rng, 8, 4);
    const auto got = ngram_overlap(r, c);
    const auto want = testing::brute_overlap(r, c, 4);
    CHECK(got.ppv == want.ppv);
    CHECK(got.sens == want.sens);
    CHECK(got.f1 == want.f1);
  }
}

TEST_CASE("cider matches a direct tf-idf computation and stays finite") {
  Rng rng(3);
  std::vector<TokenList> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(random_sentence(rng, 6, 5));
  corpus.push_back({"a"});
  const auto idf = IdfTable::build(corpus);
  for (int i = 0; i < 60; ++i) {
    const auto r = random_sentence(rng, 6, 6), c = random_sentence(rng, 6, 6);
    const double got = cider_score(r, c, idf);
    CHECK(std::isfinite(got));
    CHECK(got == doctest::Approx(brute_cider(r, c, corpus, 4)).epsilon(1e-12));
  }
  const TokenList one{"a"}, other{"zz"};
  CHECK(std::isfinite(cider_score(one, one, idf)));
  CHECK(cider_score(one, other, idf) == 0.0);
  CHECK(idf.df(std::vector<std::string>{"zz"}) == 0);
}

TEST_CASE("embedding similarity") {
  const std::vector<std::string> toks{"a", "b", "c"};
  nn::Matrix<float> v(3, 2);
  v << 1, 0, 0, 1, 0, 0;
  const EmbeddingTable table(toks, v);
  const TokenList s{"a", "b"};
  CHECK(*embedding_similarity(s, s, table) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(*embedding_similarity(TokenList{"a"}, TokenList{"b"}, table) == doctest::Approx(0.0));
  CHECK_FALSE(embedding_similarity(TokenList{"q"}, s, table));
  CHECK_FALSE(embedding_similarity(TokenList{"c"}, s, table));
}

TEST_CASE("corpus report averages per-pair scores") {
  const std::vector<TokenList> auth{{"a", "b"}, {"c"}};
  const std::vector<TokenList> syn{{"a", "b"}, {"d"}};
  nn::Matrix<float> v = nn::Matrix<float>::Identity(4, 4);
  const std::vector<std::string> toks{"a", "b", "c", "d"};
  const EmbeddingTable table(toks, v);
  const auto idf = IdfTable::build(auth);
  const auto rep = corpus_report("x", auth, syn, table, idf);
  CHECK(rep.pairs == 2);
  CHECK(rep.f1 == doctest::Approx(0.5));
  CHECK(rep.es == doctest::Approx(0.5));
  CHECK(rep.to_json().at("scheme") == "x");
}

TEST_CASE("novelty counts unique and unseen sentences") {
  const std::vector<std::string> gen{"a b", "a b", "c", "d"};
  const std::vector<std::string> train{"c", "e"};
  const auto n = novelty_report(gen, train);
  CHECK(n.unique == 3);
  CHECK(n.novel == 2);
}
