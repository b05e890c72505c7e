#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>

#include "ccgen/classifier.hpp"
#include "ccgen/common.hpp"
#include "ccgen/epi.hpp"
#include "ccgen/metrics.hpp"
#include "ccgen/nn/checkpoint.hpp"
#include "ccgen/pipeline.hpp"
#include "ccgen/sampler.hpp"
#include "ccgen/schema.hpp"
#include "ccgen/synth.hpp"
#include "ccgen/text.hpp"

namespace py = pybind11;
using namespace ccgen;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  if (o.is_none()) return nlohmann::json::object();
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

SamplerConfig sampler(const std::string& scheme, std::size_t k, double t) {
  SamplerConfig s;
  s.scheme = parse_scheme(scheme);
  s.k = k;
  s.temperature = t;
  s.validate();
  return s;
}

std::vector<SamplerConfig> sampler_list(const std::vector<py::dict>& specs) {
  std::vector<SamplerConfig> out;
  for (const auto& d : specs) {
    out.push_back(sampler(d.contains("scheme") ? d["scheme"].cast<std::string>() : "greedy",
                          d.contains("k") ? d["k"].cast<std::size_t>() : 5,
                          d.contains("t") ? d["t"].cast<double>() : 1.0));
  }
  return out;
}

py::dict overlap_dict(const Overlap& o) {
  py::dict d;
  d["ppv"] = o.ppv;
  d["sens"] = o.sens;
  d["f1"] = o.f1;
  return d;
}

py::dict hypothesis_dict(const Hypothesis& h, const Vocabulary& vocab) {
  py::dict d;
  d["text"] = decode_tokens(h.tokens, vocab);
  d["tokens"] = h.tokens;
  d["log_prob"] = h.log_prob;
  d["ended_with_eos"] = h.ended_with_eos;
  return d;
}

// Trained encoder-decoder plus vocabulary, for decoding single records.
class Model {
 public:
  Model(const fs::path& checkpoint, const fs::path& vocab)
      : params_(nn::load_checkpoint(checkpoint).params), vocab_(Vocabulary::load(vocab)), inf_(params_) {
    if (vocab_.size() != inf_.vocab_size()) throw ValidationError("vocabulary does not match the checkpoint");
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  std::size_t record_dim() const { return seq2seq_dims(params_).record_dim; }

  py::dict greedy(const std::vector<std::size_t>& bits, std::size_t max_len) const {
    const auto r = EncodedRecord::from_indices(bits, record_dim());
    return hypothesis_dict(greedy_decode(Seq2SeqDecoder(inf_, r), max_len), vocab_);
  }
  py::list beam(const std::vector<std::size_t>& bits, std::size_t k, std::size_t max_len) const {
    const auto r = EncodedRecord::from_indices(bits, record_dim());
    py::list out;
    for (const auto& h : beam_decode(Seq2SeqDecoder(inf_, r), k, max_len)) out.append(hypothesis_dict(h, vocab_));
    return out;
  }
  py::dict sample(const std::vector<std::size_t>& bits, double t, std::uint64_t seed, std::size_t max_len) const {
    const auto r = EncodedRecord::from_indices(bits, record_dim());
    Rng rng(seed);
    return hypothesis_dict(temperature_sample(Seq2SeqDecoder(inf_, r), t, rng, max_len), vocab_);
  }
  double log_prob(const std::vector<std::size_t>& bits, const std::string& text, std::size_t max_len) const {
    const auto r = EncodedRecord::from_indices(bits, record_dim());
    return sequence_log_prob(r, encode_sentence(text, vocab_, max_len), params_);
  }

 private:
  nn::ParamStore<float> params_;
  Vocabulary vocab_;
  Seq2SeqInference inf_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Record-to-text generation core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  // ---- records and text ----
  py::class_<RecordSchema>(m, "RecordSchema")
      .def_static("load", &load_schema_file, py::arg("path"))
      .def_property_readonly("total_dim", &RecordSchema::total_dim)
      .def_property_readonly("names",
                             [](const RecordSchema& s) {
                               std::vector<std::string> n;
                               for (const auto& v : s.variables()) n.push_back(v.name);
                               return n;
                             })
      .def("encode",
           [](const RecordSchema& s, const std::vector<std::vector<int>>& values) {
             RawRecord r{values};
             return encode_record(r, s).set_indices();
           })
      .def("decode", [](const RecordSchema& s, const std::vector<std::size_t>& bits) {
        return decode_record(std::span<const std::size_t>(bits), s).values;
      });

  m.def("tokenize", [](const std::string& s) { return tokenize(s); });
  m.def(
      "synth_corpus",
      [](const fs::path& generator, std::uint64_t seed, std::size_t size) {
        auto cfg = load_gen_config_file(generator);
        if (size > 0) cfg.size = size;
        py::list out;
        for (const auto& r : synth_corpus(cfg, seed)) out.append(py::make_tuple(r.record.values, r.text));
        return out;
      },
      py::arg("generator"), py::arg("seed"), py::arg("size") = 0);

  // ---- metrics ----
  m.def(
      "ngram_overlap",
      [](const std::string& ref, const std::string& cand, std::size_t n_max) {
        return overlap_dict(ngram_overlap(tokenize(ref), tokenize(cand), n_max));
      },
      py::arg("ref"), py::arg("cand"), py::arg("n_max") = kDefaultNgramMax);
  m.def(
      "cider",
      [](const std::vector<std::string>& refs, const std::vector<std::string>& cands, std::size_t n_max) {
        if (refs.size() != cands.size()) throw ValidationError("cider: lists must be aligned");
        std::vector<TokenList> r, c;
        for (const auto& s : refs) r.push_back(tokenize(s));
        for (const auto& s : cands) c.push_back(tokenize(s));
        const auto idf = IdfTable::build(r, n_max);
        std::vector<double> out;
        for (std::size_t i = 0; i < r.size(); ++i) out.push_back(cider_score(r[i], c[i], idf, n_max));
        return out;
      },
      py::arg("refs"), py::arg("cands"), py::arg("n_max") = kDefaultNgramMax);
  m.def("weighted_metrics", [](const std::vector<int>& pred, const std::vector<int>& truth) {
    return to_py(weighted_metrics(pred, truth).to_json());
  });
  m.def("ratio_from_counts", [](std::size_t a, std::size_t n_a, std::size_t b, std::size_t n_b) {
    return to_py(ratio_from_counts(a, n_a, b, n_b).to_json());
  });

  // ---- decoding ----
  py::class_<Model>(m, "Model")
      .def(py::init<const fs::path&, const fs::path&>(), py::arg("checkpoint"), py::arg("vocab"))
      .def_property_readonly("record_dim", &Model::record_dim)
      .def("greedy", &Model::greedy, py::arg("bits"), py::arg("max_len") = kDefaultMaxLen)
      .def("beam", &Model::beam, py::arg("bits"), py::arg("k") = 5, py::arg("max_len") = kDefaultMaxLen)
      .def("sample", &Model::sample, py::arg("bits"), py::arg("t") = 1.0, py::arg("seed") = 0,
           py::arg("max_len") = kDefaultMaxLen)
      .def("log_prob", &Model::log_prob, py::arg("bits"), py::arg("text"), py::arg("max_len") = kDefaultMaxLen);

  // ---- pipeline ----
  py::class_<RunConfig>(m, "RunConfig")
      .def_static(
          "load",
          [](const fs::path& path, const py::object& overrides) { return load_run_config(path, from_py(overrides)); },
          py::arg("path"), py::arg("overrides") = py::none())
      .def_readonly("seed", &RunConfig::seed)
      .def_readonly("fingerprint", &RunConfig::fingerprint)
      .def_readonly("outputs", &RunConfig::outputs)
      .def_readonly("checkpoints", &RunConfig::checkpoints)
      .def_readonly("prepared", &RunConfig::prepared)
      .def_readonly("data", &RunConfig::data)
      .def_readonly("max_len", &RunConfig::max_len)
      .def("schema", &RunConfig::schema);

  auto& log = std::cerr;
  m.def("synth_data", [&log](const RunConfig& c) { cmd_synth_data(c, log); });
  m.def("preprocess", [&log](const RunConfig& c) { cmd_preprocess(c, log); });
  m.def("pretrain_encoder", [&log](const RunConfig& c) { cmd_pretrain_encoder(c, log); });
  m.def("train", [&log](const RunConfig& c) { cmd_train(c, log); });
  m.def(
      "generate",
      [&log](const RunConfig& c, const std::string& scheme, std::size_t k, double t, const std::string& split,
             std::size_t limit) {
        GenerateOptions o;
        o.sampler = sampler(scheme, k, t);
        o.split = split;
        o.limit = limit;
        return cmd_generate(c, o, log);
      },
      py::arg("config"), py::arg("scheme") = "greedy", py::arg("k") = 5, py::arg("t") = 1.0, py::arg("split") = "test",
      py::arg("limit") = 0);
  m.def(
      "evaluate",
      [&log](const RunConfig& c, const std::vector<py::dict>& schemes) {
        EvaluateOptions o;
        o.schemes = sampler_list(schemes);
        py::list out;
        for (const auto& r : cmd_evaluate(c, o, log)) out.append(to_py(r.to_json()));
        return out;
      },
      py::arg("config"), py::arg("schemes") = std::vector<py::dict>{});
  m.def("classify_train", [&log](const RunConfig& c) { cmd_classify_train(c, log); });
  m.def(
      "classify_eval",
      [&log](const RunConfig& c, const std::vector<py::dict>& schemes) {
        py::list out;
        for (const auto& r : cmd_classify_eval(c, sampler_list(schemes), log)) {
          auto j = r.report.to_json();
          j["scheme"] = r.scheme;
          out.append(to_py(j));
        }
        return out;
      },
      py::arg("config"), py::arg("schemes") = std::vector<py::dict>{});
  m.def(
      "epi_report",
      [&log](const RunConfig& c, const std::string& scheme, std::size_t k, double t, const std::string& split) {
        cmd_epi_report(c, sampler(scheme, k, t), split, log);
      },
      py::arg("config"), py::arg("scheme") = "greedy", py::arg("k") = 5, py::arg("t") = 1.0, py::arg("split") = "test");
  m.def("train_embeddings", [&log](const RunConfig& c) { cmd_train_embeddings(c, log); });
  m.def(
      "scan_names",
      [&log](const RunConfig& c, const fs::path& names, const std::string& scheme, std::size_t k, double t,
             const std::string& split) { cmd_scan_names(c, names, sampler(scheme, k, t), split, log); },
      py::arg("config"), py::arg("names"), py::arg("scheme") = "greedy", py::arg("k") = 5, py::arg("t") = 1.0,
      py::arg("split") = "valid");
  m.def(
      "novelty",
      [&log](const RunConfig& c, const std::string& scheme, std::size_t k, double t, const std::string& split) {
        cmd_novelty(c, sampler(scheme, k, t), split, log);
      },
      py::arg("config"), py::arg("scheme") = "greedy", py::arg("k") = 5, py::arg("t") = 1.0, py::arg("split") = "test");
}
