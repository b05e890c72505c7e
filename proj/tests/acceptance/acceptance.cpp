// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Details go to stderr and to
// acceptance_report.txt in the working directory.
//
//   acceptance [--work DIR] [--only 1,2,...]

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ccgen/classifier.hpp"
#include "ccgen/common.hpp"
#include "ccgen/epi.hpp"
#include "ccgen/metrics.hpp"
#include "ccgen/names.hpp"
#include "ccgen/nn/checkpoint.hpp"
#include "ccgen/nn/grad_check.hpp"
#include "ccgen/nn/optim.hpp"
#include "ccgen/pipeline.hpp"
#include "ccgen/sampler.hpp"
#include "ccgen/seq2seq.hpp"
#include "ccgen/skipgram.hpp"
#include "support/oracles.hpp"
#include "support/table_model.hpp"

namespace fs = std::filesystem;
using namespace ccgen;
using json = nlohmann::json;

namespace {

const std::vector<std::uint64_t> kSeeds = {7, 8, 9};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::ofstream g_report;

void note(const std::string& s) {
  std::cerr << s << '\n';
  g_report << "  " << s << '\n';
}

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Toy pipeline runs, one per seed, shared by several criteria.

struct SeedRun {
  std::uint64_t seed = 0;
  RunConfig cfg;
  fs::path dir;
};

RunConfig toy_config(std::uint64_t seed, const fs::path& dir) {
  const fs::path src = CCGEN_SOURCE_DIR;
  const auto doc = read_config_json(src / "configs" / "run_toy.json");
  json overrides = {{"seed", seed},
                    {"paths",
                     {{"data", (dir / "pairs.csv").string()},
                      {"prepared", (dir / "prepared").string()},
                      {"checkpoints", (dir / "checkpoints").string()},
                      {"outputs", (dir / "outputs").string()}}}};
  return make_run_config(doc, src / "configs", overrides);
}

bool manifest_current(const RunConfig& cfg, const std::string& command) {
  const auto path = Artifacts(cfg).manifest(command);
  if (!fs::exists(path)) return false;
  std::ifstream in(path);
  const auto m = json::parse(in, nullptr, false);
  return !m.is_discarded() && m.value("fingerprint", std::string()) == cfg.fingerprint;
}

bool g_reuse = false;

// Runs the toy pipeline for one seed. With --reuse, stages whose manifest
// matches the config fingerprint are skipped.
SeedRun& toy_run(std::uint64_t seed, const fs::path& work) {
  static std::map<std::uint64_t, SeedRun> runs;
  auto it = runs.find(seed);
  if (it != runs.end()) return it->second;
  SeedRun r;
  r.seed = seed;
  r.dir = work / ("toy_seed" + std::to_string(seed));
  r.cfg = toy_config(seed, r.dir);
  fs::create_directories(r.dir);
  std::ofstream log(r.dir / "pipeline.log", std::ios::app);
  const std::vector<std::pair<std::string, std::function<void()>>> stages = {
      {"synth-data", [&] { cmd_synth_data(r.cfg, log); }},
      {"preprocess", [&] { cmd_preprocess(r.cfg, log); }},
      {"pretrain-encoder", [&] { cmd_pretrain_encoder(r.cfg, log); }},
      {"train", [&] { cmd_train(r.cfg, log); }},
      {"train-embeddings", [&] { cmd_train_embeddings(r.cfg, log); }},
      {"classify-train", [&] { cmd_classify_train(r.cfg, log); }},
  };
  bool upstream_ran = false;
  for (const auto& [name, fn] : stages) {
    if (g_reuse && !upstream_ran && manifest_current(r.cfg, name)) continue;
    std::cerr << "[seed " << seed << "] " << name << '\n';
    fn();
    upstream_ran = true;
  }
  return runs.emplace(seed, std::move(r)).first->second;
}

std::vector<Example> split_of(const SeedRun& r, const std::string& name) {
  return read_examples(Artifacts(r.cfg).split(name), r.cfg.schema().total_dim());
}

std::vector<std::string> generated_texts(const SeedRun& r, const SamplerConfig& s, const std::string& split) {
  std::ofstream log(r.dir / "pipeline.log", std::ios::app);
  GenerateOptions g;
  g.sampler = s;
  g.split = split;
  const auto path = cmd_generate(r.cfg, g, log);
  std::vector<std::string> out;
  for (const auto& row : read_generated(path)) out.push_back(row.text);
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  // 64-bit gradient checks, d = 8, V = 20, 3 pairs.
  auto p = make_seq2seq_params<double>({12, 20, 8});
  nn::init_params(p, 1);
  Rng rng(2);
  std::vector<EncodedRecord> recs;
  std::vector<TokenSequence> seqs;
  for (int i = 0; i < 3; ++i) {
    std::vector<std::size_t> bits;
    for (std::size_t b = 0; b < 12; ++b) {
      if (rng.bernoulli(0.3)) bits.push_back(b);
    }
    recs.push_back(EncodedRecord::from_indices(bits, 12));
    std::vector<int> content(2 + rng.below(4));
    for (auto& t : content) t = kReservedTokens + static_cast<int>(rng.below(17));
    seqs.push_back(make_sequence(content, 6));
  }
  std::vector<PairView> views;
  for (int i = 0; i < 3; ++i) views.push_back({&recs[static_cast<std::size_t>(i)], &seqs[static_cast<std::size_t>(i)]});
  nn::GradCheckOptions opt;
  opt.eps = 1e-5;
  opt.floor = 1e-7;
  nn::LossFn s2s = [&](const nn::ParamStore<double>& params, nn::ParamStore<double>* g) {
    nn::Tape<double> tape(&params);
    auto loss = seq2seq_batch_loss(tape, std::span<const PairView>(views));
    if (g) {
      tape.backward(loss);
      tape.accumulate_gradients(*g);
    }
    return tape.scalar(loss);
  };
  const auto r1 = nn::grad_check(s2s, p, opt);

  auto cp = make_classifier_params<double>({20, 8, 8, 5});
  nn::init_params(cp, 3);
  std::vector<std::vector<int>> sents;
  for (const auto& s : seqs) sents.emplace_back(s.content().begin(), s.content().end());
  const std::vector<Sentence> batch(sents.begin(), sents.end());
  const std::vector<int> labels{0, 3, 1};
  nn::LossFn cls = [&](const nn::ParamStore<double>& params, nn::ParamStore<double>* g) {
    nn::Tape<double> tape(&params);
    auto loss = classifier_batch_loss(tape, std::span<const Sentence>(batch), std::span<const int>(labels));
    if (g) {
      tape.backward(loss);
      tape.accumulate_gradients(*g);
    }
    return tape.scalar(loss);
  };
  const auto r2 = nn::grad_check(cls, cp, opt);
  note("seq2seq: " + std::to_string(r1.checked) + " coords, max rel err " + sci(r1.max_rel_error) + " at " +
       r1.worst_param);
  note("classifier: " + std::to_string(r2.checked) + " coords, max rel err " + sci(r2.max_rel_error) + " at " +
       r2.worst_param);
  const double worst = std::max(r1.max_rel_error, r2.max_rel_error);
  return {worst < 1e-4, "max relative error " + sci(worst) + " (< 1e-4)"};
}

Outcome criterion2(const fs::path& work) {
  const auto& run = toy_run(kSeeds[0], work);
  const auto params = nn::load_checkpoint(Artifacts(run.cfg).seq2seq()).params;
  const Seq2SeqInference inf(params);
  auto recs = split_of(run, "test");
  if (recs.size() > 1000) recs.resize(1000);
  std::size_t identical = 0;
  for (const auto& e : recs) {
    const Seq2SeqDecoder dec(inf, e.record);
    const auto g = greedy_decode(dec, run.cfg.max_len);
    const auto b = beam_decode(dec, 1, run.cfg.max_len);
    identical += b.size() == 1 && b[0].tokens == g.tokens;
  }
  SampleTrace trace;
  Rng rng(stage_seed(run.seed, "acceptance.low-temperature"));
  for (std::size_t i = 0; trace.steps < 1000; i = (i + 1) % recs.size()) {
    temperature_sample(Seq2SeqDecoder(inf, recs[i].record), 0.001, rng, run.cfg.max_len, &trace);
  }
  const double match = static_cast<double>(trace.matched_argmax) / static_cast<double>(trace.steps);
  note("beam k=1 vs greedy: " + std::to_string(identical) + "/" + std::to_string(recs.size()) + " identical");
  note("t=0.001: " + std::to_string(trace.matched_argmax) + "/" + std::to_string(trace.steps) + " steps at argmax");
  return {identical == recs.size() && match >= 0.999,
          "beam1==greedy " + std::to_string(identical) + "/" + std::to_string(recs.size()) + ", t=0.001 argmax rate " +
              fmt(match)};
}

Outcome criterion3() {
  const auto m = testing::hand_built_model();
  const auto best = testing::exhaustive_best(m, 3);
  bool ok = true;
  std::string detail = "exhaustive best logp " + fmt(best.log_prob, 6);
  for (std::size_t k : {1, 2, 5}) {
    const auto b = beam_decode(m, k, 3);
    const bool same = !b.empty() && b[0].tokens == best.tokens && b[0].log_prob == best.log_prob;
    ok = ok && same;
    detail += "; k=" + std::to_string(k) + (same ? " match" : " MISMATCH");
  }
  return {ok, detail};
}

Outcome criterion4(const fs::path& work) {
  bool ok = true;
  Rng rng(4);
  std::size_t exact = 0;
  for (int i = 0; i < 200; ++i) {
    auto make = [&] {
      TokenList s(1 + rng.below(8));
      for (auto& t : s) t = std::string(1, static_cast<char>('a' + rng.below(5)));
      return s;
    };
    const auto r = make(), c = make();
    const auto got = ngram_overlap(r, c);
    const auto want = testing::brute_overlap(r, c, 4);
    exact += got.ppv == want.ppv && got.sens == want.sens && got.f1 == want.f1;
  }
  ok = ok && exact == 200;

  // CIDEr and ES on the toy test split against greedy output, plus
  // length-1 sentences.
  const auto& run = toy_run(kSeeds[0], work);
  std::vector<TokenList> refs;
  for (const auto& e : split_of(run, "test")) refs.push_back(tokenize(e.text));
  const auto idf = IdfTable::build(refs);
  std::vector<TokenList> cands;
  for (const auto& t : generated_texts(run, SamplerConfig{}, "test")) cands.push_back(tokenize(t));
  refs.push_back({"fever"});
  cands.push_back({"fever"});
  refs.push_back({"cough"});
  cands.push_back({"headache"});
  std::size_t finite = 0, scored = 0, len1 = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].empty() || cands[i].empty()) continue;
    ++scored;
    len1 += refs[i].size() == 1 || cands[i].size() == 1;
    finite += std::isfinite(cider_score(refs[i], cands[i], idf));
  }
  ok = ok && finite == scored && len1 > 0;

  const auto table = load_skipgram(Artifacts(run.cfg).skipgram()).table();
  double worst_es = 0.0;
  std::size_t es_n = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (const auto es = embedding_similarity(refs[i], refs[i], table)) {
      worst_es = std::max(worst_es, std::abs(*es - 1.0));
      ++es_n;
    }
  }
  ok = ok && es_n > 0 && worst_es <= 1e-6;

  const auto z = ngram_overlap(tokenize("heat stroke hypertension"), tokenize("biba came in hospital for evaluation"));
  const bool zero = z.ppv == 0.0 && z.sens == 0.0 && z.f1 == 0.0;
  ok = ok && zero;
  note("overlap oracle exact on " + std::to_string(exact) + "/200 pairs");
  note("cider finite on " + std::to_string(finite) + "/" + std::to_string(scored) + " pairs (" + std::to_string(len1) +
       " with a length-1 side)");
  note("ES(s,s) max |1 - es| = " + sci(worst_es) + " over " + std::to_string(es_n) + " sentences");
  return {ok, "oracle " + std::to_string(exact) + "/200, cider finite " + std::to_string(finite) + "/" +
                  std::to_string(scored) + ", max|ES(s,s)-1| " + sci(worst_es) + ", zero case " +
                  (zero ? "0" : "nonzero")};
}

double unigram_entropy(const std::vector<Example>& train) {
  std::map<int, double> counts;
  double total = 0.0;
  for (const auto& e : train) {
    for (int t : e.tokens.content()) counts[t] += 1.0;
    counts[kEos] += 1.0;
    total += static_cast<double>(e.tokens.content_len) + 1.0;
  }
  double h = 0.0;
  for (const auto& [t, c] : counts) h -= (c / total) * std::log(c / total);
  return h;
}

Outcome criterion5(const fs::path& work) {
  const auto& run = toy_run(kSeeds[0], work);
  const auto train = split_of(run, "train");
  const auto valid = split_of(run, "valid");
  const auto params = nn::load_checkpoint(Artifacts(run.cfg).seq2seq()).params;
  std::vector<PairView> views;
  for (const auto& e : valid) views.push_back({&e.record, &e.tokens});
  const double ce = seq2seq_eval_loss(params, views).per_token();
  const double h = unigram_entropy(train);

  SamplerConfig greedy, prob;
  prob.scheme = Scheme::Probabilistic;
  prob.temperature = 1.0;
  std::ofstream log(run.dir / "pipeline.log", std::ios::app);
  EvaluateOptions opts;
  opts.schemes = {greedy, prob};
  const auto rep = cmd_evaluate(run.cfg, opts, log);
  const auto& g = rep.at(0);
  const auto& p = rep.at(1);
  const bool order = g.f1 > p.f1 && g.ppv > p.ppv && g.sens > p.sens && g.cider > p.cider && g.es > p.es;
  note("valid per-token CE " + fmt(ce) + " vs unigram entropy " + fmt(h));
  note("greedy  ppv " + fmt(g.ppv) + " sens " + fmt(g.sens) + " f1 " + fmt(g.f1) + " cider " + fmt(g.cider) + " es " +
       fmt(g.es));
  note("prob_t1 ppv " + fmt(p.ppv) + " sens " + fmt(p.sens) + " f1 " + fmt(p.f1) + " cider " + fmt(p.cider) + " es " +
       fmt(p.es));
  return {ce < h && order, "CE " + fmt(ce) + " < H " + fmt(h) + "; greedy f1 " + fmt(g.f1) + " vs prob_t1 " +
                               fmt(p.f1) + (order ? ", all five metrics ordered" : ", ordering violated")};
}

Outcome criterion6(const fs::path& work) {
  std::size_t wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& run = toy_run(seed, work);
    std::ofstream log(run.dir / "pipeline.log", std::ios::app);
    const auto rows = cmd_classify_eval(run.cfg, {SamplerConfig{}}, log);
    const double auth = rows.at(0).report.f1, syn = rows.at(1).report.f1;
    const bool ok = syn >= auth - 0.05;
    wins += ok;
    note("seed " + std::to_string(seed) + ": authentic F1 " + fmt(auth) + ", greedy F1 " + fmt(syn));
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " " + fmt(auth) + "/" +
              fmt(syn);
  }
  return {wins >= 2, std::to_string(wins) + "/3 seeds with greedy >= authentic - 0.05 (" + detail + ")"};
}

Outcome criterion7(const fs::path& work) {
  std::size_t wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& run = toy_run(seed, work);
    const auto names = read_name_list(Artifacts(run.cfg).names_truth());
    const auto vocab = Vocabulary::load(Artifacts(run.cfg).vocab());
    std::size_t in_vocab = 0;
    for (const auto& t : names.tokens()) in_vocab += vocab.id(t).has_value();
    std::vector<TokenList> train_toks;
    for (const auto& e : split_of(run, "train")) train_toks.push_back(tokenize(e.text));
    const auto train_hits = count_name_hits(train_toks, names);
    std::vector<TokenList> gen;
    for (const auto& t : generated_texts(run, SamplerConfig{}, "valid")) gen.push_back(tokenize(t));
    const auto hits = count_name_hits(gen, names);
    const double rate = static_cast<double>(hits.sentences) / static_cast<double>(gen.size());
    const bool ok = rate <= 1e-4;
    wins += ok;
    note("seed " + std::to_string(seed) + ": " + std::to_string(names.size()) + " sentinels, " +
         std::to_string(in_vocab) + " in vocab, " + std::to_string(train_hits.sentences) +
         " training sentences carry one; greedy valid " + std::to_string(hits.sentences) + "/" +
         std::to_string(gen.size()) + " sentences");
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " " +
              std::to_string(hits.sentences) + "/" + std::to_string(gen.size());
  }
  return {wins >= 2, std::to_string(wins) + "/3 seeds at <= 0.01% (" + detail + ")"};
}

Outcome criterion8(const fs::path& work) {
  const auto a = ratio_from_counts(207, 2234, 48, 4009);
  const auto b = ratio_from_counts(229, 2234, 27, 4009);
  const bool arith = std::abs(*a.risk_ratio - 7.74) <= 0.01 && std::abs(*a.odds_ratio - 8.43) <= 0.01 &&
                     std::abs(*b.risk_ratio - 15.22) <= 0.01 && std::abs(*b.odds_ratio - 16.84) <= 0.01;
  note("reported counts: RR " + fmt(*a.risk_ratio) + " OR " + fmt(*a.odds_ratio) + "; synthetic counts RR " +
       fmt(*b.risk_ratio) + " OR " + fmt(*b.odds_ratio));

  std::size_t wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& run = toy_run(seed, work);
    const auto schema = run.cfg.schema();
    const auto probes = load_probe_config(run.cfg.probes, schema);
    const auto& fall = probes.probes.at(0);
    std::vector<RawRecord> recs;
    std::vector<TokenList> auth, syn;
    for (const std::string split : {"train", "valid"}) {
      for (const auto& e : split_of(run, split)) {
        recs.push_back(decode_record(e.record, schema));
        auth.push_back(tokenize(e.text));
      }
      for (const auto& t : generated_texts(run, SamplerConfig{}, split)) syn.push_back(tokenize(t));
    }
    const auto ra = group_ratio(word_by_category(recs, auth, fall.target, fall.variable, schema), fall.group_a,
                                fall.group_b);
    const auto rs = group_ratio(word_by_category(recs, syn, fall.target, fall.variable, schema), fall.group_a,
                                fall.group_b);
    const double rra = ra.risk_ratio.value_or(NAN), rrs = rs.risk_ratio.value_or(NAN);
    const bool ok = rra >= 6.0 && rra <= 10.0 && rrs >= rra;
    wins += ok;
    note("seed " + std::to_string(seed) + ": authentic " + std::to_string(ra.a) + "/" + std::to_string(ra.n_a) + " vs " +
         std::to_string(ra.b) + "/" + std::to_string(ra.n_b) + " RR " + fmt(rra) + "; greedy " + std::to_string(rs.a) +
         "/" + std::to_string(rs.n_a) + " vs " + std::to_string(rs.b) + "/" + std::to_string(rs.n_b) + " RR " +
         fmt(rrs));
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " " + fmt(rra, 2) + "->" +
              fmt(rrs, 2);
  }
  return {arith && wins >= 2, std::string("ratio arithmetic ") + (arith ? "ok" : "off") + "; " + std::to_string(wins) +
                                  "/3 seeds with authentic RR in [6,10] and synthetic >= authentic (" + detail + ")"};
}

Outcome criterion9() {
  Rng rng(9);
  std::size_t agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(60), k = 2 + rng.below(8);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(k));
      pred[i] = rng.bernoulli(0.6) ? truth[i] : static_cast<int>(rng.below(k));
    }
    const auto got = weighted_metrics(pred, truth);
    const auto want = testing::brute_weighted(pred, truth);
    agree += std::abs(got.sens - want.sens) <= 1e-12 && std::abs(got.ppv - want.ppv) <= 1e-12 &&
             std::abs(got.f1 - want.f1) <= 1e-12;
  }
  const std::vector<int> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
  const auto h = weighted_metrics(pred, truth);
  const bool hand = std::abs(h.sens - 0.75) <= 1e-12 && std::abs(h.ppv - 5.0 / 6.0) <= 1e-12 &&
                    std::abs(h.f1 - 0.7333) <= 1e-4;
  note("hand example: sens " + fmt(h.sens, 6) + " ppv " + fmt(h.ppv, 6) + " f1 " + fmt(h.f1, 6));
  return {agree == 100 && hand, "oracle agreement " + std::to_string(agree) + "/100; hand example sens " + fmt(h.sens) +
                                    " ppv " + fmt(h.ppv) + " f1 " + fmt(h.f1)};
}

// Small config run twice through the CLI in separate directories.
std::string small_config() {
  const fs::path src = CCGEN_SOURCE_DIR;
  json c = {
      {"seed", 3},
      {"schema", (src / "configs" / "schema_table1.json").string()},
      {"generator", (src / "configs" / "toy_corpus.json").string()},
      {"paths", {{"data", "work/pairs.csv"}, {"prepared", "work/prepared"}, {"checkpoints", "work/checkpoints"},
                 {"outputs", "work/outputs"}}},
      {"synth", {{"size", 4000}}},
      {"preprocess", {{"min_freq", 5}, {"max_len", 18}, {"train_fraction", 0.75}, {"test_size", 300}}},
      {"model", {{"hidden", 24}}},
      {"pretrain", {{"enabled", true}, {"epochs", 1}, {"batch", 256}, {"lr", 0.001}}},
      {"train", {{"batch", 128}, {"lr", 0.003}, {"patience", 2}, {"max_epochs", 3}, {"clip_norm", 0}}},
      {"sampler", {{"sweep", json::array({{{"scheme", "greedy"}}, {{"scheme", "beam"}, {"k", 3}},
                                          {{"scheme", "prob"}, {"t", 1.0}}})}}},
      {"evaluate", {{"split", "test"}, {"ngram_max", 4}, {"embeddings", "skipgram"}}},
      {"classifier", {{"embed", 16}, {"hidden", 8}, {"batch", 128}, {"lr", 0.003}, {"patience", 1}, {"max_epochs", 2}}},
      {"embeddings", {{"dim", 16}, {"window", 3}, {"negatives", 3}, {"epochs", 1}, {"lr", 0.025}}},
      {"names", {{"k", 10}}},
      {"epi", read_config_json(src / "configs" / "run_toy.json").at("epi")},
  };
  return c.dump(2);
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[e.path().lexically_relative(root).generic_string()] = ss.str();
  }
  return files;
}

Outcome criterion10(const fs::path& work) {
  const std::string cli = CCGEN_CLI_PATH;
  const std::vector<std::string> commands = {"synth-data",   "preprocess",     "pretrain-encoder", "train",
                                             "evaluate",     "classify-train", "classify-eval",    "epi-report",
                                             "novelty"};
  std::vector<fs::path> dirs = {work / "repro_a", work / "repro_b"};
  for (const auto& d : dirs) {
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "run.json") << small_config();
    for (const auto& c : commands) {
      const std::string cmd = "\"" + cli + "\" -c \"" + (d / "run.json").string() + "\" " + c + " >> \"" +
                              (d / "cli.log").string() + "\" 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + c + " (see " + (d / "cli.log").string() + ")"};
    }
  }
  const auto a = snapshot(dirs[0] / "work"), b = snapshot(dirs[1] / "work");
  std::size_t same = 0;
  std::vector<std::string> differ;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it != b.end() && it->second == bytes) {
      ++same;
    } else {
      differ.push_back(name);
    }
  }
  const bool reports = a.count("outputs/report.txt") && a.count("outputs/classify.txt") && a.count("outputs/epi.txt");
  for (const auto& d : differ) note("differs: " + d);

  // Checkpoint round trip.
  const auto ckpt = dirs[0] / "work" / "checkpoints" / "seq2seq.ccf";
  const auto loaded = nn::load_checkpoint(ckpt);
  const auto copy = work / "roundtrip.ccf";
  nn::save_checkpoint(copy, loaded.params, loaded.meta);
  const auto again = nn::load_checkpoint(copy);
  bool bit_exact = again.meta == loaded.meta && again.params.size() == loaded.params.size();
  for (std::size_t i = 0; bit_exact && i < loaded.params.size(); ++i) {
    const auto& x = loaded.params[i];
    const auto& y = again.params[i];
    bit_exact = x.shape == y.shape &&
                std::equal(x.raw(), x.raw() + x.size(), y.raw(), [](float p, float q) {
                  return std::memcmp(&p, &q, sizeof(float)) == 0;
                });
  }
  std::ifstream f1(ckpt, std::ios::binary), f2(copy, std::ios::binary);
  std::ostringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  bit_exact = bit_exact && s1.str() == s2.str();
  note(std::to_string(same) + "/" + std::to_string(a.size()) + " artifacts byte-identical across runs");
  return {differ.empty() && a.size() == b.size() && reports && bit_exact,
          std::to_string(same) + "/" + std::to_string(a.size()) + " artifacts identical, checkpoint round trip " +
              (bit_exact ? "bit-exact" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::current_path() / "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--reuse") {
      g_reuse = true;
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--work DIR] [--reuse] [--only 1,2,...]\n";
      return 2;
    }
  }
  fs::create_directories(work);
  g_report.open("acceptance_report.txt");

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient check", [] { return criterion1(); }},
      {"decoder equivalences", [&] { return criterion2(work); }},
      {"beam optimality", [] { return criterion3(); }},
      {"metric oracles", [&] { return criterion4(work); }},
      {"toy end-to-end learning", [&] { return criterion5(work); }},
      {"classifier transfer", [&] { return criterion6(work); }},
      {"sentinel names", [&] { return criterion7(work); }},
      {"epi amplification", [&] { return criterion8(work); }},
      {"weighted metrics oracle", [] { return criterion9(); }},
      {"reproducibility", [&] { return criterion10(work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    g_report << "criterion " << id << ": " << criteria[i].first << '\n';
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::string line = std::string(o.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(id) + " (" +
                             criteria[i].first + "): " + o.detail;
    std::cout << line << std::endl;
    g_report << line << '\n';
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
