#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccgen/schema.hpp"

namespace ccgen {

struct PhraseSpec {
  std::string text;  // may contain {slot} placeholders
  double weight = 1.0;
};

struct TemplateSpec {
  int code = 0;
  double weight = 1.0;
  std::vector<PhraseSpec> phrases;
};

// Distribution of a single-valued variable. Empty weights mean uniform.
struct CategoricalSpec {
  std::vector<double> weights;
  double missing = 0.0;
};

// Variables of which a record carries at most one (e.g. disposition with or
// without transfer). weights pick the variable; its own CategoricalSpec then
// picks the value.
struct ExclusiveGroup {
  std::vector<std::string> variables;
  std::vector<double> weights;
  double missing = 0.0;
};

struct Condition {
  std::string variable;
  std::vector<int> categories;
};

// Prefixes `word` with probability base_rate, multiplied when the record
// satisfies the condition.
struct WordRule {
  std::string word;
  double base_rate = 0.0;
  Condition when;
  double multiplier = 1.0;
};

// Scales the sampling weight of a diagnosis code for matching records.
struct PrevalenceRule {
  int code = 0;
  Condition when;
  double multiplier = 1.0;
};

struct NameSpec {
  std::vector<std::string> tokens;
  // Exact planted count per token; when empty, counts are drawn uniformly from
  // [min_count, max_count].
  std::vector<std::size_t> counts;
  std::size_t min_count = 10;
  std::size_t max_count = 20;
  // Each must contain {text} and {name}.
  std::vector<std::string> contexts;
};

struct GenConfig {
  std::size_t size = 0;
  RecordSchema schema;
  std::string diagnosis_variable = "diagnosis";
  std::map<std::string, CategoricalSpec> variables;
  std::vector<ExclusiveGroup> exclusive;
  std::vector<TemplateSpec> templates;
  std::map<std::string, std::vector<std::string>> slots;
  double missing_diagnosis_rate = 0.0;
  double secondary_code_rate = 0.0;
  double noise_rate = 0.0;
  std::vector<std::string> noise_words;
  double long_tail_rate = 0.0;
  double typo_rate = 0.0;
  double capitalize_rate = 0.0;
  std::vector<WordRule> word_rules;
  std::vector<PrevalenceRule> prevalence_rules;
  NameSpec names;
};

// Validates references to schema variables, codes and slots. Throws
// ValidationError. `base_dir` resolves a relative "schema" path.
GenConfig load_gen_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
GenConfig load_gen_config_file(const std::filesystem::path& path);

struct SynthInfo {
  std::map<std::string, std::size_t> planted_names;
};

// Deterministic in (config, seed): record i draws from the stream
// Rng::derive(seed, i); sentinel-name placement uses its own stream.
std::vector<RecordText> synth_corpus(const GenConfig& config, std::uint64_t seed, SynthInfo* info = nullptr);

}  // namespace ccgen
