#include <doctest.h>

#include <algorithm>

#include "ccgen/common.hpp"
#include "ccgen/epi.hpp"
#include "ccgen/rng.hpp"

using namespace ccgen;

namespace {

RecordSchema epi_schema() { return RecordSchema({{"age", 4, false, true}, {"dx", 6, true, true}}); }

}  // namespace

TEST_CASE("ratios from the reported counts") {
  const auto auth = ratio_from_counts(207, 2234, 48, 4009);
  const double rr = (207.0 / 2234.0) / (48.0 / 4009.0);
  const double orr = (207.0 / (2234.0 - 207.0)) / (48.0 / (4009.0 - 48.0));
  CHECK(*auth.risk_ratio == doctest::Approx(rr).epsilon(1e-12));
  CHECK(*auth.odds_ratio == doctest::Approx(orr).epsilon(1e-12));
  CHECK(std::abs(*auth.risk_ratio - 7.74) <= 0.01);
  CHECK(std::abs(*auth.odds_ratio - 8.43) <= 0.01);

  const auto syn = ratio_from_counts(229, 2234, 27, 4009);
  CHECK(std::abs(*syn.risk_ratio - 15.22) <= 0.01);
  CHECK(std::abs(*syn.odds_ratio - 16.84) <= 0.01);
  CHECK(verdict(auth, syn, 1.1) == "amplified");
  CHECK(verdict(syn, auth, 1.1) == "attenuated");
  CHECK(verdict(auth, auth, 1.1) == "preserved");
}

TEST_CASE("zero denominators leave ratios undefined") {
  const auto r = ratio_from_counts(3, 10, 0, 10);
  CHECK_FALSE(r.risk_ratio);
  CHECK_FALSE(r.odds_ratio);
  const auto all = ratio_from_counts(10, 10, 2, 10);
  CHECK(all.risk_ratio);
  CHECK_FALSE(all.odds_ratio);
  CHECK(verdict(r, all, 1.1) == "undefined");
  CHECK_THROWS_AS(ratio_from_counts(11, 10, 0, 10), ValidationError);
}

TEST_CASE("cross tabulation equals a direct scan") {
  const auto schema = epi_schema();
  Rng rng(3);
  std::vector<RawRecord> recs;
  std::vector<TokenList> sents;
  const std::vector<std::string> words{"fall", "Fall", "pain", "fallen", "hip"};
  for (int i = 0; i < 500; ++i) {
    RawRecord r = empty_record(schema);
    if (!rng.bernoulli(0.1)) r.values[0] = {static_cast<int>(rng.below(4))};
    if (!rng.bernoulli(0.2)) r.values[1] = {static_cast<int>(rng.below(6))};
    recs.push_back(r);
    TokenList s;
    for (std::size_t j = 0, n = 1 + rng.below(4); j < n; ++j) s.push_back(words[rng.below(words.size())]);
    sents.push_back(s);
  }
  const auto tab = word_by_category(recs, sents, "fall", "age", schema);
  for (int cat = 0; cat < 4; ++cat) {
    std::size_t total = 0, containing = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].values[0] != std::vector<int>{cat}) continue;
      ++total;
      bool hit = false;
      for (const auto& t : sents[i]) hit = hit || t == "fall" || t == "Fall";
      containing += hit;
    }
    CHECK(tab.categories[static_cast<std::size_t>(cat)].total == total);
    CHECK(tab.categories[static_cast<std::size_t>(cat)].containing == containing);
  }
  std::size_t missing = 0;
  for (const auto& r : recs) missing += r.values[0].empty();
  CHECK(tab.missing.total == missing);

  const auto codes = code_by_category(recs, 2, "dx", "age", schema);
  std::size_t with_dx = 0, with_2 = 0;
  for (const auto& r : recs) {
    if (r.values[1].empty() || r.values[0] != std::vector<int>{1}) continue;
    ++with_dx;
    with_2 += r.values[1].front() == 2;
  }
  CHECK(codes.categories[1].total == with_dx);
  CHECK(codes.categories[1].containing == with_2);

  const std::vector<int> a{3}, b{0, 1};
  const auto pooled = group_ratio(tab, a, b);
  CHECK(pooled.n_b == tab.categories[0].total + tab.categories[1].total);
  const std::vector<int> overlap{3, 1};
  CHECK_THROWS_AS(group_ratio(tab, a, overlap), ValidationError);
  const std::vector<int> out_of_range{7};
  CHECK_THROWS_AS(group_ratio(tab, a, out_of_range), ValidationError);
  CHECK_THROWS_AS(word_by_category(recs, sents, "fall", "nope", schema), ValidationError);
}

TEST_CASE("probe config and report") {
  const auto schema = epi_schema();
  const auto cfg = load_probe_config(nlohmann::json::parse(R"({"threshold": 1.2, "diagnosis_variable": "dx", "probes": [
      {"kind": "word", "target": "Fall", "variable": "age", "groupA": [3], "groupB": "others"},
      {"kind": "code", "target": 2, "variable": "age", "groupA": [3], "groupB": [0]}]})"),
                                     schema);
  REQUIRE(cfg.probes.size() == 2);
  CHECK(cfg.probes[0].target == "fall");

  std::vector<RawRecord> recs;
  std::vector<TokenList> auth, syn;
  for (int i = 0; i < 40; ++i) {
    RawRecord r = empty_record(schema);
    r.values[0] = {i % 4};
    r.values[1] = {i % 3 == 0 ? 2 : 1};
    recs.push_back(r);
    const bool old = i % 4 == 3;
    auth.push_back(old && i % 8 == 3 ? TokenList{"fall"} : i % 10 == 0 ? TokenList{"fall"} : TokenList{"pain"});
    syn.push_back(old ? TokenList{"fall"} : i % 10 == 0 ? TokenList{"fall"} : TokenList{"pain"});
  }
  const auto rows = epi_report(recs, auth, syn, cfg, schema);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].verdict == "amplified");
  CHECK(rows[0].synthetic.n_b == 30);
  CHECK(rows[1].verdict == "preserved");
  CHECK(rows[1].authentic.risk_ratio == rows[1].synthetic.risk_ratio);
  CHECK(format_epi_table(rows).find("amplified") != std::string::npos);

  CHECK_THROWS_AS(load_probe_config(nlohmann::json::parse(R"({"probes": [{"kind": "x", "target": "a",
      "variable": "age", "groupA": [1], "groupB": [2]}]})"),
                                    schema),
                  ValidationError);
}
