#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccgen/classifier.hpp"
#include "ccgen/metrics.hpp"
#include "ccgen/sampler.hpp"
#include "ccgen/schema.hpp"
#include "ccgen/seq2seq.hpp"
#include "ccgen/skipgram.hpp"
#include "ccgen/train.hpp"

namespace ccgen {

namespace fs = std::filesystem;

// Everything a command needs, parsed from one JSON document (comments
// allowed). Relative paths resolve against the directory of the config file.
// The fingerprint is FNV-1a over the compact dumps of the document and of the
// schema and generator documents it references.
struct RunConfig {
  nlohmann::json doc;
  fs::path base_dir;
  std::uint64_t seed = 0;
  std::string fingerprint;

  fs::path schema_path;
  fs::path generator_path;
  fs::path data;
  fs::path prepared;
  fs::path checkpoints;
  fs::path outputs;

  std::size_t synth_size = 0;  // 0 keeps the generator's size

  std::size_t min_freq = kDefaultMinFreq;
  std::size_t max_len = kDefaultMaxLen;
  double train_fraction = 0.75;
  std::size_t test_size = 50000;

  std::size_t hidden = kDefaultHidden;
  bool pretrain = true;
  std::size_t pretrain_epochs = 5;
  std::size_t pretrain_batch = 512;
  double pretrain_lr = 1e-3;
  TrainConfig train;

  std::vector<SamplerConfig> sweep;
  std::string eval_split = "test";
  std::size_t ngram_max = kDefaultNgramMax;
  std::string es_embeddings = "skipgram";  // or "decoder"

  ClassifierDims classifier;
  TrainConfig classifier_train;

  SkipgramConfig skipgram;
  std::size_t names_k = 100;

  nlohmann::json probes = nlohmann::json::object();

  RecordSchema schema() const;
};

// Throws ValidationError on schema violations. `overrides` is merged into the
// document (JSON merge patch) before the fingerprint is taken.
RunConfig make_run_config(nlohmann::json doc, const fs::path& base_dir,
                          const nlohmann::json& overrides = nlohmann::json::object());
RunConfig load_run_config(const fs::path& path, const nlohmann::json& overrides = nlohmann::json::object());

// Seed for one pipeline stage, derived from the global seed.
std::uint64_t stage_seed(std::uint64_t seed, const std::string& stage);

// Artifact locations.
struct Artifacts {
  explicit Artifacts(const RunConfig& cfg) : cfg_(&cfg) {}
  fs::path vocab() const;
  fs::path split(const std::string& name) const;
  fs::path names_truth() const;
  fs::path encoder() const;
  fs::path seq2seq() const;
  fs::path classifier() const;
  fs::path skipgram() const;
  fs::path log(const std::string& name) const;
  fs::path generated(const SamplerConfig& sampler, const std::string& split) const;
  fs::path output(const std::string& name) const;
  fs::path manifest(const std::string& command) const;

 private:
  const RunConfig* cfg_;
};

// Scheme label written into generation rows. Beam search with k = 1 is the
// greedy decoder and is labelled as such.
std::string canonical_label(const SamplerConfig& s);
nlohmann::json sampler_fields(const SamplerConfig& s);

// Generation rows: record_index, scheme, k or t, text, log_prob, fingerprint,
// seed.
struct GeneratedRow {
  std::size_t record_index = 0;
  std::string text;
  double log_prob = 0.0;
};
std::vector<GeneratedRow> read_generated(const fs::path& path);

void cmd_synth_data(const RunConfig& cfg, std::ostream& log);
void cmd_preprocess(const RunConfig& cfg, std::ostream& log);
void cmd_pretrain_encoder(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);

struct GenerateOptions {
  SamplerConfig sampler;
  std::string split = "test";
  std::optional<fs::path> out;
  std::size_t limit = 0;  // 0: whole split
};
fs::path cmd_generate(const RunConfig& cfg, const GenerateOptions& opts, std::ostream& log);

struct EvaluateOptions {
  // Empty: the configured sweep.
  std::vector<SamplerConfig> schemes;
  // Direct comparison of two generation or split files instead of the sweep.
  std::optional<fs::path> authentic;
  std::optional<fs::path> synthetic;
  std::optional<fs::path> out_prefix;
};
std::vector<MetricReport> cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opts, std::ostream& log);

void cmd_classify_train(const RunConfig& cfg, std::ostream& log);

struct ClassifyRow {
  std::string scheme;
  ClassificationReport report;
};
std::vector<ClassifyRow> cmd_classify_eval(const RunConfig& cfg, const std::vector<SamplerConfig>& schemes,
                                           std::ostream& log);

void cmd_epi_report(const RunConfig& cfg, const SamplerConfig& scheme, const std::string& split, std::ostream& log);
void cmd_train_embeddings(const RunConfig& cfg, std::ostream& log);

struct FindNamesOptions {
  fs::path seeds;
  std::optional<fs::path> curate_with;  // scripted curator: accept tokens listed in this file
  bool interactive = false;
  std::istream* input = nullptr;  // prompt answers in interactive mode
  std::optional<fs::path> out;
};
// Returns true when the session has finished and the name list was written.
bool cmd_find_names(const RunConfig& cfg, const FindNamesOptions& opts, std::ostream& log);

void cmd_scan_names(const RunConfig& cfg, const fs::path& names, const SamplerConfig& scheme, const std::string& split,
                    std::ostream& log);
void cmd_novelty(const RunConfig& cfg, const SamplerConfig& scheme, const std::string& split, std::ostream& log);

}  // namespace ccgen
