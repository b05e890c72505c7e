#include "ccgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ccgen/common.hpp"
#include "ccgen/epi.hpp"
#include "ccgen/names.hpp"
#include "ccgen/nn/checkpoint.hpp"
#include "ccgen/nn/optim.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/synth.hpp"
#include "ccgen/text.hpp"

namespace ccgen {

using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys = {"seed",     "schema",     "generator", "paths",    "synth",
                                        "preprocess", "model",    "pretrain",  "train",    "sampler",
                                        "evaluate", "classifier", "embeddings", "names",   "epi"};

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ValidationError(where + ": unknown key '" + k + "'");
  }
}

json section(const json& doc, const std::string& name, const std::set<std::string>& allowed) {
  if (!doc.contains(name)) return json::object();
  check_keys(doc[name], name, allowed);
  return doc[name];
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

SamplerConfig parse_sampler(const json& j) {
  check_keys(j, "sampler entry", {"scheme", "k", "t"});
  SamplerConfig s;
  s.scheme = parse_scheme(j.at("scheme").get<std::string>());
  if (j.contains("k")) s.k = j["k"].get<std::size_t>();
  if (j.contains("t")) s.temperature = j["t"].get<double>();
  s.validate();
  return s;
}

std::vector<SamplerConfig> default_sweep() {
  std::vector<SamplerConfig> out;
  for (std::size_t k : {3, 5, 10}) {
    SamplerConfig s;
    s.scheme = Scheme::Beam;
    s.k = k;
    out.push_back(s);
  }
  for (double t : {0.5, 1.0}) {
    SamplerConfig s;
    s.scheme = Scheme::Probabilistic;
    s.temperature = t;
    out.push_back(s);
  }
  out.push_back(SamplerConfig{});
  return out;
}

TrainConfig parse_train(const json& j, TrainConfig t) {
  t.lr = j.value("lr", t.lr);
  t.batch = j.value("batch", t.batch);
  t.patience = j.value("patience", t.patience);
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.clip_norm = j.value("clip_norm", t.clip_norm);
  if (t.batch == 0 || t.max_epochs == 0 || !(t.lr > 0)) {
    throw ValidationError("training settings need positive batch, max_epochs and lr");
  }
  return t;
}

json stamp(json row, const RunConfig& cfg) {
  row["fingerprint"] = cfg.fingerprint;
  row["seed"] = cfg.seed;
  return row;
}

std::map<std::string, std::string> ckpt_meta(const RunConfig& cfg, const std::string& kind) {
  return {{"kind", kind}, {"fingerprint", cfg.fingerprint}, {"seed", std::to_string(cfg.seed)}};
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw ValidationError("missing " + path.string() + " (produced by `ccgen " + producer + "`)");
  }
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

void write_manifest(const RunConfig& cfg, const std::string& command, const std::vector<fs::path>& files,
                    const json& summary = json::object()) {
  json outputs = json::array();
  for (const auto& f : files) {
    outputs.push_back({{"path", f.lexically_relative(cfg.base_dir).generic_string()},
                       {"bytes", fs::file_size(f)},
                       {"fnv1a64", hex64(file_hash(f))}});
  }
  json m = stamp({{"command", command}, {"outputs", outputs}, {"summary", summary}}, cfg);
  auto out = open_out(Artifacts(cfg).manifest(command));
  out << m.dump(2) << '\n';
}

std::vector<Example> load_split(const RunConfig& cfg, const std::string& split) {
  if (split != "train" && split != "valid" && split != "test") {
    throw ValidationError("unknown split '" + split + "' (expected train, valid or test)");
  }
  const auto path = Artifacts(cfg).split(split);
  require(path, "preprocess");
  return read_examples(path, cfg.schema().total_dim());
}

Vocabulary load_vocab(const RunConfig& cfg) {
  const auto path = Artifacts(cfg).vocab();
  require(path, "preprocess");
  return Vocabulary::load(path);
}

nn::ParamStore<float> load_params(const fs::path& path, const std::string& producer) {
  require(path, producer);
  return nn::load_checkpoint(path).params;
}

std::vector<TokenList> tokenize_all(const std::vector<std::string>& texts) {
  std::vector<TokenList> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tokenize(t));
  return out;
}

std::vector<std::string> texts_of(const std::vector<Example>& ex) {
  std::vector<std::string> out;
  for (const auto& e : ex) out.push_back(e.text);
  return out;
}

// A generated file is reused only when its manifest matches this config and
// the current seq2seq checkpoint and covers the whole split.
bool generated_is_current(const RunConfig& cfg, const SamplerConfig& s, const std::string& split) {
  const Artifacts art(cfg);
  SamplerConfig probe = s;
  probe.max_len = cfg.max_len;
  const auto manifest = art.manifest("generate." + split + "." + probe.label());
  if (!fs::exists(art.generated(s, split)) || !fs::exists(manifest) || !fs::exists(art.seq2seq())) return false;
  try {
    std::ifstream in(manifest);
    const auto m = json::parse(in);
    const auto& sum = m.at("summary");
    return m.at("fingerprint") == cfg.fingerprint && sum.value("limit", std::size_t{1}) == 0 &&
           sum.at("seq2seq_fnv1a64") == hex64(file_hash(art.seq2seq())) &&
           m.at("outputs").at(0).at("fnv1a64") == hex64(file_hash(art.generated(s, split)));
  } catch (const json::exception&) {
    return false;
  }
}

// Generated texts aligned with the split, generating the file if needed.
std::vector<std::string> synthetic_texts(const RunConfig& cfg, const SamplerConfig& s, const std::string& split,
                                         std::size_t expected, std::ostream& log) {
  const Artifacts art(cfg);
  auto path = art.generated(s, split);
  if (!generated_is_current(cfg, s, split)) {
    log << "[" << canonical_label(s) << "] no current generated file for split " << split << ", generating\n";
    GenerateOptions g;
    g.sampler = s;
    g.split = split;
    path = cmd_generate(cfg, g, log);
  }
  const auto rows = read_generated(path);
  if (rows.size() != expected) {
    throw ValidationError(path.string() + " holds " + std::to_string(rows.size()) + " rows, split " + split + " has " +
                          std::to_string(expected));
  }
  std::vector<std::string> out(expected);
  for (const auto& r : rows) {
    if (r.record_index >= expected) throw FormatError(path.string() + ": record_index out of range");
    out[r.record_index] = r.text;
  }
  return out;
}

SkipgramModel ensure_skipgram(const RunConfig& cfg, std::ostream& log) {
  const auto path = Artifacts(cfg).skipgram();
  bool current = false;
  if (fs::exists(path)) {
    const auto meta = nn::load_checkpoint(path).meta;
    const auto it = meta.find("fingerprint");
    current = it != meta.end() && it->second == cfg.fingerprint;
  }
  if (!current) {
    log << "[embeddings] no skipgram checkpoint for this config, training one\n";
    cmd_train_embeddings(cfg, log);
  }
  return load_skipgram(path);
}

std::vector<int> ids_of(const std::string& text, const Vocabulary& vocab) {
  std::vector<int> out;
  for (const auto& t : tokenize(text)) {
    if (const auto id = vocab.id(t)) out.push_back(*id);
  }
  return out;
}

std::string fixed(double x, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

RecordSchema RunConfig::schema() const { return load_schema_file(schema_path); }

std::uint64_t stage_seed(std::uint64_t seed, const std::string& stage) { return splitmix64(seed ^ fnv1a64(stage)); }

RunConfig make_run_config(json doc, const fs::path& base_dir, const json& overrides) {
  if (!doc.is_object()) throw ValidationError("run config must be a JSON object");
  doc.merge_patch(overrides);
  RunConfig c;
  c.base_dir = fs::absolute(base_dir).lexically_normal();
  try {
    check_keys(doc, "run config", kTopKeys);
    c.doc = doc;
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.schema_path = resolve(c.base_dir, doc.at("schema").get<std::string>());
    if (doc.contains("generator")) c.generator_path = resolve(c.base_dir, doc["generator"].get<std::string>());
    // The referenced schema and generator documents are part of the fingerprint.
    std::string fp = doc.dump() + '\n' + read_config_json(c.schema_path).dump();
    if (!c.generator_path.empty() && fs::exists(c.generator_path)) fp += '\n' + read_config_json(c.generator_path).dump();
    c.fingerprint = hex64(fnv1a64(fp));

    const auto paths = section(doc, "paths", {"data", "prepared", "checkpoints", "outputs"});
    c.data = resolve(c.base_dir, paths.value("data", std::string("work/pairs.csv")));
    c.prepared = resolve(c.base_dir, paths.value("prepared", std::string("work/prepared")));
    c.checkpoints = resolve(c.base_dir, paths.value("checkpoints", std::string("work/checkpoints")));
    c.outputs = resolve(c.base_dir, paths.value("outputs", std::string("work/outputs")));

    c.synth_size = section(doc, "synth", {"size"}).value("size", std::size_t{0});

    const auto pre = section(doc, "preprocess", {"min_freq", "max_len", "train_fraction", "test_size"});
    c.min_freq = pre.value("min_freq", c.min_freq);
    c.max_len = pre.value("max_len", c.max_len);
    c.train_fraction = pre.value("train_fraction", c.train_fraction);
    c.test_size = pre.value("test_size", c.test_size);
    if (c.max_len == 0) throw ValidationError("preprocess.max_len must be positive");

    c.hidden = section(doc, "model", {"hidden"}).value("hidden", c.hidden);
    if (c.hidden == 0) throw ValidationError("model.hidden must be positive");

    const auto pt = section(doc, "pretrain", {"enabled", "epochs", "batch", "lr"});
    c.pretrain = pt.value("enabled", c.pretrain);
    c.pretrain_epochs = pt.value("epochs", c.pretrain_epochs);
    c.pretrain_batch = pt.value("batch", c.pretrain_batch);
    c.pretrain_lr = pt.value("lr", c.pretrain_lr);

    c.train = parse_train(section(doc, "train", {"batch", "lr", "patience", "max_epochs", "clip_norm"}), TrainConfig{});

    const auto smp = section(doc, "sampler", {"sweep"});
    if (smp.contains("sweep")) {
      for (const auto& s : smp["sweep"]) c.sweep.push_back(parse_sampler(s));
    } else {
      c.sweep = default_sweep();
    }
    for (auto& s : c.sweep) s.max_len = c.max_len;

    const auto ev = section(doc, "evaluate", {"split", "ngram_max", "embeddings"});
    c.eval_split = ev.value("split", c.eval_split);
    c.ngram_max = ev.value("ngram_max", c.ngram_max);
    c.es_embeddings = ev.value("embeddings", c.es_embeddings);
    if (c.es_embeddings != "skipgram" && c.es_embeddings != "decoder") {
      throw ValidationError("evaluate.embeddings must be skipgram or decoder");
    }
    if (c.ngram_max == 0) throw ValidationError("evaluate.ngram_max must be positive");

    const auto cl = section(doc, "classifier", {"embed", "hidden", "batch", "lr", "patience", "max_epochs", "clip_norm"});
    c.classifier.embed = cl.value("embed", c.classifier.embed);
    c.classifier.hidden = cl.value("hidden", c.classifier.hidden);
    TrainConfig ct;
    ct.batch = 128;
    c.classifier_train = parse_train(cl, ct);

    const auto em = section(doc, "embeddings", {"dim", "window", "negatives", "epochs", "lr"});
    c.skipgram.dim = em.value("dim", c.skipgram.dim);
    c.skipgram.window = em.value("window", c.skipgram.window);
    c.skipgram.negatives = em.value("negatives", c.skipgram.negatives);
    c.skipgram.epochs = em.value("epochs", c.skipgram.epochs);
    c.skipgram.lr = em.value("lr", c.skipgram.lr);

    c.names_k = section(doc, "names", {"k"}).value("k", c.names_k);
    c.probes = section(doc, "epi", {"threshold", "probes", "diagnosis_variable"});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path, const json& overrides) {
  return make_run_config(read_config_json(path), fs::absolute(path).parent_path(), overrides);
}

fs::path Artifacts::vocab() const { return cfg_->prepared / "vocab.tsv"; }
fs::path Artifacts::split(const std::string& name) const { return cfg_->prepared / (name + ".jsonl"); }
fs::path Artifacts::names_truth() const { return fs::path(cfg_->data.string() + ".names"); }
fs::path Artifacts::encoder() const { return cfg_->checkpoints / "encoder.ccf"; }
fs::path Artifacts::seq2seq() const { return cfg_->checkpoints / "seq2seq.ccf"; }
fs::path Artifacts::classifier() const { return cfg_->checkpoints / "classifier.ccf"; }
fs::path Artifacts::skipgram() const { return cfg_->checkpoints / "skipgram.ccf"; }
fs::path Artifacts::log(const std::string& name) const { return cfg_->outputs / "logs" / (name + ".jsonl"); }
fs::path Artifacts::generated(const SamplerConfig& s, const std::string& split) const {
  return cfg_->outputs / "generated" / (split + "." + s.label() + ".jsonl");
}
fs::path Artifacts::output(const std::string& name) const { return cfg_->outputs / name; }
fs::path Artifacts::manifest(const std::string& command) const {
  return cfg_->outputs / "manifests" / (command + ".json");
}

std::string canonical_label(const SamplerConfig& s) {
  if (s.scheme == Scheme::Beam && s.k == 1) return "greedy";
  return s.label();
}

json sampler_fields(const SamplerConfig& s) {
  if (s.scheme == Scheme::Beam && s.k == 1) return {{"scheme", "greedy"}};
  json j{{"scheme", to_string(s.scheme)}};
  if (s.scheme == Scheme::Beam) j["k"] = s.k;
  if (s.scheme == Scheme::Probabilistic) j["t"] = s.temperature;
  return j;
}

std::vector<GeneratedRow> read_generated(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::vector<GeneratedRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      GeneratedRow r;
      r.record_index = j.value("record_index", rows.size());
      r.text = j.at("text").get<std::string>();
      r.log_prob = j.value("log_prob", 0.0);
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

void cmd_synth_data(const RunConfig& cfg, std::ostream& log) {
  if (cfg.generator_path.empty()) throw ValidationError("run config has no \"generator\" entry");
  auto gen = load_gen_config_file(cfg.generator_path);
  if (cfg.synth_size > 0) gen.size = cfg.synth_size;
  if (gen.schema.to_json() != cfg.schema().to_json()) {
    throw ValidationError("generator schema differs from the run schema");
  }
  SynthInfo info;
  const auto pairs = synth_corpus(gen, stage_seed(cfg.seed, "synth"), &info);
  if (cfg.data.has_parent_path()) fs::create_directories(cfg.data.parent_path());
  write_csv(cfg.data, pairs, gen.schema);
  const auto truth = Artifacts(cfg).names_truth();
  {
    auto out = open_out(truth);
    out << "# planted sentinel names\n";
    for (const auto& [name, count] : info.planted_names) out << name << "\t# planted count=" << count << '\n';
  }
  log << "[synth-data] wrote " << pairs.size() << " pairs to " << cfg.data.string() << '\n';
  write_manifest(cfg, "synth-data", {cfg.data, truth}, {{"pairs", pairs.size()}});
}

void cmd_preprocess(const RunConfig& cfg, std::ostream& log) {
  require(cfg.data, "synth-data");
  const auto schema = cfg.schema();
  const auto ingest = ingest_csv(cfg.data, schema);
  for (std::size_t i = 0; i < ingest.rejected.size() && i < 5; ++i) log << "[preprocess] " << ingest.rejected[i] << '\n';
  if (ingest.rows.empty()) throw ValidationError(cfg.data.string() + " holds no valid rows");

  std::vector<std::string> texts;
  for (const auto& r : ingest.rows) texts.push_back(r.text);
  const auto vocab = Vocabulary::build(texts, cfg.min_freq);
  FilterStats stats;
  const auto kept = filter_corpus(ingest.rows, vocab, cfg.max_len, &stats);
  if (kept.empty()) throw ValidationError("no pairs survive filtering");
  const auto split = split_pairs(kept.size(), cfg.train_fraction, cfg.test_size, stage_seed(cfg.seed, "split"));

  const Artifacts art(cfg);
  fs::create_directories(cfg.prepared);
  vocab.save(art.vocab());
  std::vector<fs::path> files{art.vocab()};
  for (const auto& [name, idx] : {std::pair{"train", &split.train}, {"valid", &split.valid}, {"test", &split.test}}) {
    std::vector<Example> ex;
    ex.reserve(idx->size());
    for (auto i : *idx) ex.push_back(make_example(kept[i], schema, vocab, cfg.max_len));
    write_examples(art.split(name), ex);
    files.push_back(art.split(name));
  }
  log << "[preprocess] " << ingest.rows.size() << " rows, " << ingest.rejected.size() << " rejected; kept "
      << stats.kept << " (oov " << stats.dropped_oov << ", length " << stats.dropped_length << ", empty "
      << stats.dropped_empty << "); vocab " << vocab.size() << "; train/valid/test " << split.train.size() << "/"
      << split.valid.size() << "/" << split.test.size() << '\n';
  write_manifest(cfg, "preprocess", files,
                 {{"rows", ingest.rows.size()},
                  {"rejected", ingest.rejected.size()},
                  {"kept", stats.kept},
                  {"dropped_oov", stats.dropped_oov},
                  {"dropped_length", stats.dropped_length},
                  {"dropped_empty", stats.dropped_empty},
                  {"vocab_size", vocab.size()},
                  {"train", split.train.size()},
                  {"valid", split.valid.size()},
                  {"test", split.test.size()}});
}

void cmd_pretrain_encoder(const RunConfig& cfg, std::ostream& log) {
  const auto train = load_split(cfg, "train");
  std::vector<EncodedRecord> records;
  for (const auto& e : train) records.push_back(e.record);
  AutoencoderStats stats;
  const auto enc = pretrain_autoencoder(records, cfg.hidden, cfg.pretrain_epochs, cfg.pretrain_batch, cfg.pretrain_lr,
                                        stage_seed(cfg.seed, "pretrain"), &stats);
  const Artifacts art(cfg);
  fs::create_directories(cfg.checkpoints);
  nn::save_checkpoint(art.encoder(), enc, ckpt_meta(cfg, "encoder"));
  auto out = open_out(art.log("pretrain"));
  for (std::size_t e = 0; e < stats.epoch_loss.size(); ++e) {
    out << stamp({{"epoch", e + 1}, {"train_loss", stats.epoch_loss[e]}}, cfg).dump() << '\n';
    log << "[pretrain-encoder] epoch " << e + 1 << " loss " << stats.epoch_loss[e] << '\n';
  }
  out.close();
  write_manifest(cfg, "pretrain-encoder", {art.encoder(), art.log("pretrain")},
                 {{"initial_loss", stats.initial_loss}, {"epochs", stats.epoch_loss.size()}});
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto vocab = load_vocab(cfg);
  const auto train = load_split(cfg, "train");
  const auto valid = load_split(cfg, "valid");
  const Artifacts art(cfg);
  auto params = make_seq2seq_params<float>({cfg.schema().total_dim(), vocab.size(), cfg.hidden});
  nn::init_params(params, stage_seed(cfg.seed, "seq2seq"));
  if (cfg.pretrain) warm_start_encoder(params, load_params(art.encoder(), "pretrain-encoder"));

  std::vector<PairView> tv, vv;
  for (const auto& e : train) tv.push_back({&e.record, &e.tokens});
  for (const auto& e : valid) vv.push_back({&e.record, &e.tokens});
  TrainConfig tc = cfg.train;
  tc.seed = stage_seed(cfg.seed, "seq2seq.batches");
  auto out = open_out(art.log("train"));
  const auto stats = train_seq2seq(params, tv, vv, tc, [&](std::size_t epoch, double tl, double vl) {
    out << stamp({{"epoch", epoch}, {"train_loss", tl}, {"valid_loss", vl}}, cfg).dump() << '\n';
    log << "[train] epoch " << epoch << " train " << tl << " valid " << vl << '\n';
  });
  out.close();
  fs::create_directories(cfg.checkpoints);
  nn::save_checkpoint(art.seq2seq(), params, ckpt_meta(cfg, "seq2seq"));
  write_manifest(cfg, "train", {art.seq2seq(), art.log("train")},
                 {{"epochs", stats.epochs},
                  {"best_epoch", stats.best_epoch},
                  {"stop_reason", to_string(stats.stop_reason)},
                  {"skipped_updates", stats.skipped_updates}});
}

fs::path cmd_generate(const RunConfig& cfg, const GenerateOptions& opts, std::ostream& log) {
  SamplerConfig s = opts.sampler;
  s.max_len = cfg.max_len;
  s.seed = stage_seed(cfg.seed, "sample." + opts.split + "." + s.label());
  s.validate();
  const auto vocab = load_vocab(cfg);
  auto ex = load_split(cfg, opts.split);
  if (opts.limit > 0 && ex.size() > opts.limit) ex.resize(opts.limit);
  const Artifacts art(cfg);
  const auto params = load_params(art.seq2seq(), "train");
  std::vector<EncodedRecord> records;
  for (const auto& e : ex) records.push_back(e.record);
  const auto gen = generate_corpus(records, params, s);
  const auto path = opts.out ? *opts.out : art.generated(s, opts.split);
  auto out = open_out(path);
  const auto fields = sampler_fields(s);
  for (const auto& g : gen) {
    json row = fields;
    row["record_index"] = g.record_index;
    row["text"] = decode_tokens(g.hypothesis.tokens, vocab);
    row["log_prob"] = g.hypothesis.log_prob;
    out << stamp(row, cfg).dump() << '\n';
  }
  out.close();
  log << "[generate] " << canonical_label(s) << ": " << gen.size() << " sentences -> " << path.string() << '\n';
  write_manifest(cfg, "generate." + opts.split + "." + s.label(), {path},
                 {{"seq2seq_fnv1a64", hex64(file_hash(art.seq2seq()))}, {"limit", opts.limit}});
  return path;
}

std::vector<MetricReport> cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opts, std::ostream& log) {
  EmbeddingTable table;
  if (cfg.es_embeddings == "skipgram") {
    table = ensure_skipgram(cfg, log).table();
  } else {
    const auto vocab = load_vocab(cfg);
    const auto params = load_params(Artifacts(cfg).seq2seq(), "train");
    const auto& emb = params.at("embedding.weight").data;
    std::vector<std::string> toks(vocab.tokens().begin() + kReservedTokens, vocab.tokens().end());
    table = EmbeddingTable(toks, emb.bottomRows(emb.rows() - kReservedTokens));
  }

  std::vector<MetricReport> reports;
  std::vector<json> extra;
  if (opts.authentic || opts.synthetic) {
    if (!opts.authentic || !opts.synthetic) throw ValidationError("--authentic and --synthetic go together");
    std::vector<std::string> a, b;
    for (const auto& r : read_generated(*opts.authentic)) a.push_back(r.text);
    for (const auto& r : read_generated(*opts.synthetic)) b.push_back(r.text);
    const auto ta = tokenize_all(a), tb = tokenize_all(b);
    const auto idf = IdfTable::build(ta, cfg.ngram_max);
    reports.push_back(corpus_report(opts.synthetic->stem().string(), ta, tb, table, idf, cfg.ngram_max));
    extra.push_back(json::object());
  } else {
    const auto ex = load_split(cfg, cfg.eval_split);
    const auto ta = tokenize_all(texts_of(ex));
    const auto idf = IdfTable::build(ta, cfg.ngram_max);
    for (const auto& s : opts.schemes.empty() ? cfg.sweep : opts.schemes) {
      const auto tb = tokenize_all(synthetic_texts(cfg, s, cfg.eval_split, ex.size(), log));
      reports.push_back(corpus_report(canonical_label(s), ta, tb, table, idf, cfg.ngram_max));
      extra.push_back(sampler_fields(s));
    }
  }
  const fs::path prefix = opts.out_prefix ? *opts.out_prefix : Artifacts(cfg).output("report");
  const fs::path txt = prefix.string() + ".txt", jsonl = prefix.string() + ".jsonl";
  {
    auto out = open_out(txt);
    out << format_report_table(reports);
    out << "fingerprint " << cfg.fingerprint << " seed " << cfg.seed << '\n';
  }
  {
    auto out = open_out(jsonl);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      json row = reports[i].to_json();
      row.update(extra[i]);
      row["scheme"] = reports[i].scheme;
      out << stamp(row, cfg).dump() << '\n';
    }
  }
  log << format_report_table(reports);
  write_manifest(cfg, "evaluate", {txt, jsonl});
  return reports;
}

namespace {

struct LabelledSet {
  std::vector<std::vector<int>> sentences;
  std::vector<int> labels;
  std::vector<std::size_t> rows;  // positions in the split
};

LabelledSet labelled(const std::vector<Example>& ex) {
  LabelledSet s;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    if (!ex[i].primary_dx) continue;
    const auto c = ex[i].tokens.content();
    s.sentences.emplace_back(c.begin(), c.end());
    s.labels.push_back(*ex[i].primary_dx);
    s.rows.push_back(i);
  }
  return s;
}

std::vector<Sentence> spans(const std::vector<std::vector<int>>& v) {
  std::vector<Sentence> out;
  out.reserve(v.size());
  for (const auto& s : v) out.emplace_back(s);
  return out;
}

std::size_t dx_classes(const RunConfig& cfg, const RecordSchema& schema) {
  const std::string dx = cfg.probes.value("diagnosis_variable", std::string("diagnosis"));
  return schema.variable(schema.index_of(dx)).cardinality;
}

}  // namespace

void cmd_classify_train(const RunConfig& cfg, std::ostream& log) {
  const auto vocab = load_vocab(cfg);
  const auto tr = labelled(load_split(cfg, "train"));
  const auto va = labelled(load_split(cfg, "valid"));
  ClassifierDims dims = cfg.classifier;
  dims.vocab_size = vocab.size();
  dims.classes = dx_classes(cfg, cfg.schema());
  auto params = make_classifier_params<float>(dims);
  nn::init_params(params, stage_seed(cfg.seed, "classifier"));
  TrainConfig tc = cfg.classifier_train;
  tc.seed = stage_seed(cfg.seed, "classifier.batches");
  const Artifacts art(cfg);
  auto out = open_out(art.log("classifier"));
  const auto trs = spans(tr.sentences), vas = spans(va.sentences);
  const auto stats = train_classifier(params, trs, tr.labels, vas, va.labels, tc,
                                      [&](std::size_t epoch, double tl, double vl) {
                                        out << stamp({{"epoch", epoch}, {"train_loss", tl}, {"valid_loss", vl}}, cfg).dump()
                                            << '\n';
                                        log << "[classify-train] epoch " << epoch << " train " << tl << " valid " << vl
                                            << '\n';
                                      });
  out.close();
  fs::create_directories(cfg.checkpoints);
  nn::save_checkpoint(art.classifier(), params, ckpt_meta(cfg, "classifier"));
  write_manifest(cfg, "classify-train", {art.classifier(), art.log("classifier")},
                 {{"epochs", stats.epochs}, {"best_epoch", stats.best_epoch}, {"stop_reason", to_string(stats.stop_reason)}});
}

std::vector<ClassifyRow> cmd_classify_eval(const RunConfig& cfg, const std::vector<SamplerConfig>& schemes,
                                           std::ostream& log) {
  const auto vocab = load_vocab(cfg);
  const auto params = load_params(Artifacts(cfg).classifier(), "classify-train");
  const auto ex = load_split(cfg, cfg.eval_split);
  const auto auth = labelled(ex);
  std::vector<ClassifyRow> rows;
  rows.push_back({"original", weighted_metrics(classify(params, spans(auth.sentences)), auth.labels)});
  for (const auto& s : schemes.empty() ? cfg.sweep : schemes) {
    const auto texts = synthetic_texts(cfg, s, cfg.eval_split, ex.size(), log);
    std::vector<std::vector<int>> syn;
    for (auto r : auth.rows) syn.push_back(ids_of(texts[r], vocab));
    rows.push_back({canonical_label(s), weighted_metrics(classify(params, spans(syn)), auth.labels)});
  }
  const Artifacts art(cfg);
  std::ostringstream table;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %8s %8s %8s\n", "scheme", "sens", "ppv", "f1");
  table << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-14s %8.4f %8.4f %8.4f\n", r.scheme.c_str(), r.report.sens, r.report.ppv,
                  r.report.f1);
    table << line;
  }
  const auto txt = art.output("classify.txt"), jsonl = art.output("classify.jsonl");
  {
    auto out = open_out(txt);
    out << table.str() << "fingerprint " << cfg.fingerprint << " seed " << cfg.seed << '\n';
  }
  {
    auto out = open_out(jsonl);
    for (const auto& r : rows) {
      json row = r.report.to_json();
      row["scheme"] = r.scheme;
      out << stamp(row, cfg).dump() << '\n';
    }
  }
  log << table.str();
  write_manifest(cfg, "classify-eval", {txt, jsonl});
  return rows;
}

void cmd_epi_report(const RunConfig& cfg, const SamplerConfig& scheme, const std::string& split, std::ostream& log) {
  const auto schema = cfg.schema();
  const auto probes = load_probe_config(cfg.probes, schema);
  const auto ex = load_split(cfg, split);
  std::vector<RawRecord> records;
  for (const auto& e : ex) records.push_back(decode_record(e.record, schema));
  const auto auth = tokenize_all(texts_of(ex));
  const auto syn = tokenize_all(synthetic_texts(cfg, scheme, split, ex.size(), log));
  const auto rows = epi_report(records, auth, syn, probes, schema);
  const Artifacts art(cfg);
  const auto txt = art.output("epi.txt"), jsonl = art.output("epi.jsonl");
  const auto table = format_epi_table(rows);
  {
    auto out = open_out(txt);
    out << "split " << split << ", synthetic " << canonical_label(scheme) << '\n'
        << table << "fingerprint " << cfg.fingerprint << " seed " << cfg.seed << '\n';
  }
  {
    auto out = open_out(jsonl);
    for (const auto& r : rows) {
      json row = r.to_json();
      row["split"] = split;
      row["synthetic_scheme"] = canonical_label(scheme);
      out << stamp(row, cfg).dump() << '\n';
    }
  }
  log << table;
  write_manifest(cfg, "epi-report", {txt, jsonl});
}

void cmd_train_embeddings(const RunConfig& cfg, std::ostream& log) {
  require(cfg.data, "synth-data");
  const auto ingest = ingest_csv(cfg.data, cfg.schema());
  std::vector<TokenList> corpus;
  for (const auto& r : ingest.rows) corpus.push_back(tokenize(r.text));
  SkipgramConfig sc = cfg.skipgram;
  sc.seed = stage_seed(cfg.seed, "skipgram");
  const auto model = train_skipgram(corpus, sc);
  const Artifacts art(cfg);
  fs::create_directories(cfg.checkpoints);
  save_skipgram(art.skipgram(), model, ckpt_meta(cfg, "skipgram"));
  auto out = open_out(art.log("skipgram"));
  for (std::size_t e = 0; e < model.epoch_loss.size(); ++e) {
    out << stamp({{"epoch", e + 1}, {"train_loss", model.epoch_loss[e]}}, cfg).dump() << '\n';
    log << "[train-embeddings] epoch " << e + 1 << " loss " << model.epoch_loss[e] << '\n';
  }
  out.close();
  write_manifest(cfg, "train-embeddings",
                 {art.skipgram(), fs::path(art.skipgram().string() + ".vocab"), art.log("skipgram")},
                 {{"vocab_size", model.size()}});
}

bool cmd_find_names(const RunConfig& cfg, const FindNamesOptions& opts, std::ostream& log) {
  const auto model = ensure_skipgram(cfg, log);
  const Artifacts art(cfg);
  const auto out_path = opts.out ? *opts.out : art.output("names.txt");
  auto finish = [&](const NameList& names, std::size_t iterations) {
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_name_list(out_path, names);
    log << "[find-names] " << names.size() << " names after " << iterations << " iterations -> " << out_path.string()
        << '\n';
    write_manifest(cfg, "find-names", {out_path}, {{"names", names.size()}, {"iterations", iterations}});
    return true;
  };

  if (opts.curate_with || opts.interactive) {
    Curator curator;
    std::set<std::string> accept;
    if (opts.curate_with) {
      for (const auto& t : read_name_list(*opts.curate_with).tokens()) accept.insert(t);
      curator = [&](const std::string&, std::span<const Neighbor> nbrs) {
        std::vector<std::string> yes;
        for (const auto& n : nbrs) {
          if (accept.count(n.token)) yes.push_back(n.token);
        }
        return yes;
      };
    } else {
      std::istream& in = opts.input ? *opts.input : std::cin;
      curator = [&](const std::string& query, std::span<const Neighbor> nbrs) {
        log << "neighbors of '" << query << "':\n";
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
          log << "  " << i + 1 << ". " << nbrs[i].token << " (" << fixed(nbrs[i].similarity) << ")\n";
        }
        log << "names (numbers or tokens, blank for none): " << std::flush;
        std::string line;
        std::getline(in, line);
        std::istringstream words(line);
        std::vector<std::string> yes;
        std::string w;
        while (words >> w) {
          if (std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            const auto i = std::stoul(w);
            if (i >= 1 && i <= nbrs.size()) yes.push_back(nbrs[i - 1].token);
          } else {
            yes.push_back(w);
          }
        }
        return yes;
      };
    }
    const auto res = name_discovery_session(read_name_list(opts.seeds), model, cfg.names_k, curator);
    return finish(res.names, res.iterations);
  }

  const auto state_path = art.output("names_session.json");
  const auto cand_path = art.output("names_candidates.tsv");
  std::optional<DiscoverySession> session;
  if (fs::exists(state_path)) {
    std::ifstream in(state_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(state_path.string() + ": " + e.what());
    }
    session.emplace(DiscoverySession::from_json(j, model));
    if (fs::exists(cand_path)) {
      session->confirm(read_candidates(cand_path));
      fs::remove(cand_path);
    }
  } else {
    session.emplace(read_name_list(opts.seeds), model, cfg.names_k);
  }
  if (session->done()) {
    fs::remove(state_path);
    return finish(session->names(), session->iteration());
  }
  write_candidates(cand_path, session->candidates());
  {
    auto out = open_out(state_path);
    out << session->to_json().dump(2) << '\n';
  }
  log << "[find-names] iteration " << session->iteration() + 1 << ": mark names in " << cand_path.string()
      << " and rerun find-names\n";
  return false;
}

void cmd_scan_names(const RunConfig& cfg, const fs::path& names_path, const SamplerConfig& scheme,
                    const std::string& split, std::ostream& log) {
  const auto names = read_name_list(names_path);
  const auto ex = load_split(cfg, split);
  const auto auth = tokenize_all(texts_of(ex));
  const auto syn = tokenize_all(synthetic_texts(cfg, scheme, split, ex.size(), log));
  const Artifacts art(cfg);
  const auto txt = art.output("names_scan.txt"), jsonl = art.output("names_scan.jsonl");
  auto otxt = open_out(txt);
  auto ojs = open_out(jsonl);
  for (const auto& [source, sents] : {std::pair{std::string("authentic"), &auth}, {canonical_label(scheme), &syn}}) {
    const auto hits = count_name_hits(*sents, names);
    json per = json::object();
    for (const auto& [n, c] : hits.per_name) per[n] = c;
    ojs << stamp({{"source", source}, {"split", split}, {"sentences", sents->size()}, {"hits", hits.sentences},
                  {"per_name", per}},
                 cfg)
               .dump()
        << '\n';
    std::ostringstream line;
    line << source << ": " << hits.sentences << " of " << sents->size() << " sentences contain a listed name\n";
    otxt << line.str();
    log << "[scan-names] " << line.str();
  }
  otxt << "fingerprint " << cfg.fingerprint << " seed " << cfg.seed << '\n';
  otxt.close();
  ojs.close();
  write_manifest(cfg, "scan-names", {txt, jsonl});
}

void cmd_novelty(const RunConfig& cfg, const SamplerConfig& scheme, const std::string& split, std::ostream& log) {
  const auto train = texts_of(load_split(cfg, "train"));
  const auto ex = load_split(cfg, split);
  const auto gen = synthetic_texts(cfg, scheme, split, ex.size(), log);
  const auto r = novelty_report(gen, train);
  const Artifacts art(cfg);
  const auto path = art.output("novelty.jsonl");
  json row = sampler_fields(scheme);
  row.update({{"split", split},
              {"generated", gen.size()},
              {"unique", r.unique},
              {"novel", r.novel},
              {"unique_fraction", gen.empty() ? 0.0 : static_cast<double>(r.unique) / static_cast<double>(gen.size())},
              {"novel_fraction", r.unique ? static_cast<double>(r.novel) / static_cast<double>(r.unique) : 0.0}});
  {
    auto out = open_out(path);
    out << stamp(row, cfg).dump() << '\n';
  }
  log << "[novelty] " << canonical_label(scheme) << ": " << r.unique << " unique of " << gen.size() << ", " << r.novel
      << " not in training text\n";
  write_manifest(cfg, "novelty", {path});
}

}  // namespace ccgen
