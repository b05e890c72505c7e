#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccgen/metrics.hpp"
#include "ccgen/schema.hpp"

namespace ccgen {

struct CategoryCount {
  std::size_t containing = 0;
  std::size_t total = 0;
  bool operator==(const CategoryCount&) const = default;
};

// Indicator counts (word in sentence, or code in the diagnosis set) per
// category of one variable. Records missing the variable land in `missing`.
struct CrossTab {
  std::string target;
  std::string variable;
  std::vector<CategoryCount> categories;
  CategoryCount missing;

  nlohmann::json to_json() const;
};

// Whole-token match on lowercased tokens. Throws ValidationError for an
// unknown variable or misaligned inputs.
CrossTab word_by_category(std::span<const RawRecord> records, std::span<const TokenList> sentences,
                          const std::string& word, const std::string& variable, const RecordSchema& schema);

// Indicator is "code in the diagnosis set". Records without any diagnosis are
// left out of every count.
CrossTab code_by_category(std::span<const RawRecord> records, int code, const std::string& diagnosis_variable,
                          const std::string& variable, const RecordSchema& schema);

struct RatioResult {
  std::size_t a = 0;
  std::size_t n_a = 0;
  std::size_t b = 0;
  std::size_t n_b = 0;
  // (a/n_a) / (b/n_b); nullopt on a zero denominator.
  std::optional<double> risk_ratio;
  // (a/(n_a-a)) / (b/(n_b-b)); nullopt on a zero denominator.
  std::optional<double> odds_ratio;

  nlohmann::json to_json() const;
};

RatioResult ratio_from_counts(std::size_t a, std::size_t n_a, std::size_t b, std::size_t n_b);

// Pools the categories of each group. Throws ValidationError when the groups
// overlap, are empty or name categories outside the variable.
RatioResult group_ratio(const CrossTab& tab, std::span<const int> group_a, std::span<const int> group_b);

RatioResult diagnosis_ratio(std::span<const RawRecord> records, int code, std::span<const int> group_a,
                            std::span<const int> group_b, const std::string& diagnosis_variable,
                            const std::string& variable, const RecordSchema& schema);

enum class ProbeKind { Word, Code };

struct Probe {
  ProbeKind kind = ProbeKind::Word;
  std::string target;
  std::string variable;
  std::vector<int> group_a;
  // Empty means every category outside group_a.
  std::vector<int> group_b;
};

struct ProbeConfig {
  std::vector<Probe> probes;
  // A synthetic/authentic risk-ratio quotient above threshold is amplified,
  // below 1/threshold attenuated.
  double threshold = 1.1;
  std::string diagnosis_variable = "diagnosis";
};

// {"threshold": 1.1, "probes": [{"kind": "word"|"code", "target": ...,
// "variable": ..., "groupA": [...], "groupB": [...] | "others"}]}
ProbeConfig load_probe_config(const nlohmann::json& j, const RecordSchema& schema);

struct ProbeRow {
  Probe probe;
  RatioResult authentic;
  RatioResult synthetic;
  // amplified, attenuated, preserved or undefined.
  std::string verdict;

  nlohmann::json to_json() const;
};

std::string verdict(const RatioResult& authentic, const RatioResult& synthetic, double threshold);

// Records are shared; the two sentence lists must be aligned with them.
std::vector<ProbeRow> epi_report(std::span<const RawRecord> records, std::span<const TokenList> authentic,
                                 std::span<const TokenList> synthetic, const ProbeConfig& config,
                                 const RecordSchema& schema);

std::string format_epi_table(std::span<const ProbeRow> rows);

}  // namespace ccgen
