#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "ccgen/common.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/schema.hpp"

using namespace ccgen;

namespace {

RecordSchema small_schema() {
  return RecordSchema({{"age", 3, false, true}, {"sex", 2, false, false}, {"dx", 5, true, true}});
}

}  // namespace

TEST_CASE("blocks tile the record vector") {
  const auto s = small_schema();
  CHECK(s.total_dim() == 10);
  CHECK(s.offset(0) == 0);
  CHECK(s.offset(1) == 3);
  CHECK(s.offset(2) == 5);
  for (std::size_t bit = 0; bit < s.total_dim(); ++bit) {
    const auto [var, code] = s.locate(bit);
    CHECK(s.offset(var) + static_cast<std::size_t>(code) == bit);
  }
  CHECK(s.index_of("dx") == 2);
  CHECK_FALSE(s.find("nope"));
  CHECK_THROWS_AS(s.index_of("nope"), ValidationError);
}

TEST_CASE("schema config is validated") {
  CHECK_THROWS_AS(load_schema(nlohmann::json::parse(R"({"variables": []})")), ValidationError);
  CHECK_THROWS_AS(load_schema(nlohmann::json::parse(R"({"variables": [{"name": "a", "cardinality": 0}]})")),
                  ValidationError);
  CHECK_THROWS_AS(load_schema(nlohmann::json::parse(
                      R"({"variables": [{"name": "a", "cardinality": 2}, {"name": "a", "cardinality": 3}]})")),
                  ValidationError);
  const auto s = load_schema(nlohmann::json::parse(
      R"({"variables": [{"name": "a", "cardinality": 2}, {"name": "b", "cardinality": 4, "multi_valued": true}]})"));
  CHECK(s.total_dim() == 6);
  CHECK(s.variable(1).multi_valued);
  CHECK(load_schema(s.to_json()).to_json() == s.to_json());
}

TEST_CASE("encode and decode are inverse on random records") {
  const auto s = small_schema();
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    RawRecord r = empty_record(s);
    if (rng.bernoulli(0.8)) r.values[0] = {static_cast<int>(rng.below(3))};
    r.values[1] = {static_cast<int>(rng.below(2))};
    std::set<int> dx;
    const auto n = rng.below(4);
    while (dx.size() < n) dx.insert(static_cast<int>(rng.below(5)));
    r.values[2].assign(dx.begin(), dx.end());
    rng.shuffle(r.values[2].begin(), r.values[2].end());

    const auto enc = encode_record(r, s);
    std::size_t ones = 0;
    for (auto b : enc.bits) ones += b;
    CHECK(ones == r.values[0].size() + r.values[1].size() + r.values[2].size());

    auto expected = r;
    std::sort(expected.values[2].begin(), expected.values[2].end());
    CHECK(decode_record(enc, s) == expected);
    CHECK(EncodedRecord::from_indices(enc.set_indices(), s.total_dim()) == enc);
  }
}

TEST_CASE("invalid records are rejected") {
  const auto s = small_schema();
  auto r = empty_record(s);
  r.values[1] = {0};
  CHECK_NOTHROW(validate_record(r, s));
  auto bad = r;
  bad.values[0] = {3};
  CHECK_THROWS_AS(validate_record(bad, s), ValidationError);
  bad = r;
  bad.values[0] = {0, 1};
  CHECK_THROWS_AS(validate_record(bad, s), ValidationError);
  bad = r;
  bad.values[1].clear();
  CHECK_THROWS_AS(validate_record(bad, s), ValidationError);
  bad = r;
  bad.values[2] = {1, 1};
  CHECK_THROWS_AS(validate_record(bad, s), ValidationError);
}

TEST_CASE("csv round trip with quoting") {
  const auto s = small_schema();
  std::vector<RecordText> rows(3);
  for (auto& row : rows) row.record = empty_record(s);
  rows[0].record.values = {{1}, {0}, {4, 2}};
  rows[0].text = "chest pain, \"sharp\"";
  rows[1].record.values = {{}, {1}, {}};
  rows[1].text = "fall at home";
  rows[2].record.values = {{2}, {1}, {0}};
  rows[2].text = "line\nbreak";

  std::stringstream buf;
  write_csv(buf, rows, s);
  const auto back = ingest_csv(buf, s);
  CHECK(back.rejected.empty());
  REQUIRE(back.rows.size() == 3);
  CHECK(back.rows[0].text == rows[0].text);
  CHECK(back.rows[0].record.values[2] == std::vector<int>{4, 2});
  CHECK(back.rows[1].record.values[0].empty());
  CHECK(back.rows[2].text == rows[2].text);
}

TEST_CASE("bad csv rows are reported and skipped") {
  const auto s = small_schema();
  std::stringstream in("age,sex,dx,chief_complaint\n0,1,2,ok\n9,1,,bad age\n0,,,missing sex\nx,0,,nan\n1,0,3;4,ok too\n");
  const auto r = ingest_csv(in, s);
  CHECK(r.rows.size() == 2);
  CHECK(r.rejected.size() == 3);
  CHECK(r.rejected[0].rfind("row 2", 0) == 0);

  std::stringstream missing_col("age,sex,chief_complaint\n0,1,x\n");
  CHECK_THROWS_AS(ingest_csv(missing_col, s), ValidationError);
}
