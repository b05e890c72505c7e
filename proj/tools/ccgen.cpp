#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccgen/common.hpp"
#include "ccgen/pipeline.hpp"

namespace {

using namespace ccgen;

struct SchemeArgs {
  std::string scheme = "greedy";
  std::size_t k = 5;
  double t = 1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--scheme", scheme, "greedy, prob or beam")->capture_default_str();
    cmd->add_option("--k", k, "beam width")->capture_default_str();
    cmd->add_option("--t", t, "sampling temperature")->capture_default_str();
  }
  SamplerConfig get() const {
    SamplerConfig s;
    s.scheme = parse_scheme(scheme);
    s.k = k;
    s.temperature = t;
    s.validate();
    return s;
  }
};

std::vector<SamplerConfig> parse_scheme_list(const std::vector<std::string>& specs) {
  // Each spec: greedy | beam:K | prob:T
  std::vector<SamplerConfig> out;
  for (const auto& spec : specs) {
    SamplerConfig s;
    const auto colon = spec.find(':');
    s.scheme = parse_scheme(spec.substr(0, colon));
    if (colon != std::string::npos) {
      const auto arg = spec.substr(colon + 1);
      try {
        if (s.scheme == Scheme::Beam) s.k = std::stoul(arg);
        if (s.scheme == Scheme::Probabilistic) s.temperature = std::stod(arg);
      } catch (const std::exception&) {
        throw ValidationError("bad scheme spec '" + spec + "'");
      }
    }
    s.validate();
    out.push_back(s);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Record-to-text generation: synthetic data, seq2seq training, decoding and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("-c,--config", config_path, "run config (JSON, comments allowed)")->required();
  app.add_option("--seed", seed, "override the config seed");

  auto* synth = app.add_subcommand("synth-data", "generate the synthetic record/complaint corpus as CSV");
  auto* prep = app.add_subcommand("preprocess", "build the vocabulary, filter and split the corpus");
  auto* pre = app.add_subcommand("pretrain-encoder", "autoencoder pretraining of the record encoder");
  auto* train = app.add_subcommand("train", "train the encoder-decoder");

  auto* gen = app.add_subcommand("generate", "decode synthetic complaints for a split");
  SchemeArgs gen_scheme;
  gen_scheme.attach(gen);
  GenerateOptions gen_opts;
  std::string gen_out;
  gen->add_option("--split", gen_opts.split, "train, valid or test")->capture_default_str();
  gen->add_option("--out", gen_out, "output JSONL (default under outputs/generated)");
  gen->add_option("--limit", gen_opts.limit, "only the first N records (0 = all)")->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "overlap, CIDEr and embedding-similarity report");
  std::vector<std::string> eval_schemes;
  std::string eval_auth, eval_syn, eval_out;
  eval->add_option("--schemes", eval_schemes, "schemes such as greedy beam:3 prob:0.5 (default: config sweep)");
  eval->add_option("--authentic", eval_auth, "compare this sentence file ...");
  eval->add_option("--synthetic", eval_syn, "... against this one instead of the sweep");
  eval->add_option("--out", eval_out, "output prefix for .txt/.jsonl (default outputs/report)");

  auto* ctrain = app.add_subcommand("classify-train", "train the BiGRU diagnosis classifier");
  auto* ceval = app.add_subcommand("classify-eval", "classifier scores on authentic and synthetic text");
  std::vector<std::string> ceval_schemes;
  ceval->add_option("--schemes", ceval_schemes, "schemes to score (default: config sweep)");

  auto* epi = app.add_subcommand("epi-report", "word and diagnosis ratio probes, authentic vs synthetic");
  SchemeArgs epi_scheme;
  epi_scheme.attach(epi);
  std::string epi_split = "test";
  epi->add_option("--split", epi_split, "split to compare")->capture_default_str();

  auto* emb = app.add_subcommand("train-embeddings", "skipgram embeddings on the unfiltered corpus");

  auto* find = app.add_subcommand("find-names", "iterative nearest-neighbor name discovery");
  FindNamesOptions find_opts;
  std::string find_seeds, find_curate, find_out;
  find->add_option("--seeds", find_seeds, "seed name list")->required();
  find->add_option("--curate-with", find_curate, "accept exactly the names in this list (scripted curation)");
  find->add_flag("--interactive", find_opts.interactive, "prompt for each query on the terminal");
  find->add_option("--out", find_out, "final name list (default outputs/names.txt)");

  auto* scan = app.add_subcommand("scan-names", "count sentences containing listed names");
  SchemeArgs scan_scheme;
  scan_scheme.attach(scan);
  std::string scan_names, scan_split = "valid";
  scan->add_option("--names", scan_names, "name list")->required();
  scan->add_option("--split", scan_split, "split to scan")->capture_default_str();

  auto* nov = app.add_subcommand("novelty", "share of generated sentences absent from training text");
  SchemeArgs nov_scheme;
  nov_scheme.attach(nov);
  std::string nov_split = "test";
  nov->add_option("--split", nov_split, "split")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  std::ostream& log = std::cerr;
  try {
    nlohmann::json overrides = nlohmann::json::object();
    if (seed) overrides["seed"] = *seed;
    const auto cfg = load_run_config(config_path, overrides);
    log << "config " << config_path << " fingerprint " << cfg.fingerprint << " seed " << cfg.seed << '\n';

    if (*synth) cmd_synth_data(cfg, log);
    if (*prep) cmd_preprocess(cfg, log);
    if (*pre) cmd_pretrain_encoder(cfg, log);
    if (*train) cmd_train(cfg, log);
    if (*gen) {
      gen_opts.sampler = gen_scheme.get();
      if (!gen_out.empty()) gen_opts.out = gen_out;
      cmd_generate(cfg, gen_opts, log);
    }
    if (*eval) {
      EvaluateOptions o;
      o.schemes = parse_scheme_list(eval_schemes);
      if (!eval_auth.empty()) o.authentic = eval_auth;
      if (!eval_syn.empty()) o.synthetic = eval_syn;
      if (!eval_out.empty()) o.out_prefix = eval_out;
      cmd_evaluate(cfg, o, log);
    }
    if (*ctrain) cmd_classify_train(cfg, log);
    if (*ceval) cmd_classify_eval(cfg, parse_scheme_list(ceval_schemes), log);
    if (*epi) cmd_epi_report(cfg, epi_scheme.get(), epi_split, log);
    if (*emb) cmd_train_embeddings(cfg, log);
    if (*find) {
      find_opts.seeds = find_seeds;
      if (!find_curate.empty()) find_opts.curate_with = find_curate;
      if (!find_out.empty()) find_opts.out = find_out;
      cmd_find_names(cfg, find_opts, log);
    }
    if (*scan) cmd_scan_names(cfg, scan_names, scan_scheme.get(), scan_split, log);
    if (*nov) cmd_novelty(cfg, nov_scheme.get(), nov_split, log);
  } catch (const ValidationError& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
