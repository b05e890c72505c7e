#include "ccgen/sampler.hpp"

#include <sstream>

namespace ccgen {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Greedy: return "greedy";
    case Scheme::Probabilistic: return "probabilistic";
    case Scheme::Beam: return "beam";
  }
  return "?";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "greedy") return Scheme::Greedy;
  if (s == "probabilistic" || s == "prob" || s == "temperature") return Scheme::Probabilistic;
  if (s == "beam") return Scheme::Beam;
  throw ValidationError("unknown sampling scheme '" + s + "' (expected greedy, probabilistic or beam)");
}

void SamplerConfig::validate() const {
  if (scheme == Scheme::Probabilistic && !(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (scheme == Scheme::Beam && k == 0) throw ValidationError("beam width must be positive");
  if (max_len == 0) throw ValidationError("max_len must be positive");
}

std::string SamplerConfig::label() const {
  std::ostringstream os;
  switch (scheme) {
    case Scheme::Greedy: os << "greedy"; break;
    case Scheme::Probabilistic: os << "prob_t" << temperature; break;
    case Scheme::Beam: os << "beam_k" << k; break;
  }
  return os.str();
}

Seq2SeqInference::Seq2SeqInference(const ParamStore<float>& params) : params_(&params) {
  const auto dims = seq2seq_dims(params);
  const auto d = static_cast<Eigen::Index>(dims.hidden);
  wx_.resize(d, 4 * d);
  wm_.resize(d, 4 * d);
  b_.resize(4 * d);
  const char* gates[4] = {"i", "f", "o", "c"};
  for (int g = 0; g < 4; ++g) {
    const std::string n = gates[g];
    wx_.middleCols(g * d, d) = params.at("lstm.W_" + n + "x").data;
    wm_.middleCols(g * d, d) = params.at("lstm.W_" + n + "m").data;
    b_.segment(g * d, d) = params.at("lstm.b_" + n).data.row(0);
  }
  emb_ = params.at("embedding.weight").data;
  wp_ = params.at("output.weight").data;
  bp_ = params.at("output.bias").data.row(0);
}

DecoderState<float> Seq2SeqInference::step(const RowVector<float>& x, const DecoderState<float>& s) const {
  const auto d = static_cast<Eigen::Index>(hidden());
  RowVector<float> pre = b_;
  pre.noalias() += x * wx_;
  pre.noalias() += s.m * wm_;
  auto sig = [](auto v) -> RowVector<float> { return (1.0f / (1.0f + (-v.array()).exp())).matrix(); };
  const RowVector<float> i = sig(pre.segment(0, d));
  const RowVector<float> f = sig(pre.segment(d, d));
  const RowVector<float> o = sig(pre.segment(2 * d, d));
  const RowVector<float> cand = pre.segment(3 * d, d).array().tanh().matrix();
  DecoderState<float> out;
  out.c = f.cwiseProduct(s.c) + i.cwiseProduct(cand);
  out.m = o.cwiseProduct(RowVector<float>(out.c.array().tanh().matrix()));
  out.t = s.t + 1;
  if (!out.m.allFinite() || !out.c.allFinite()) throw DivergenceError("decoder: non-finite state");
  return out;
}

DecoderState<float> Seq2SeqInference::start(const EncodedRecord& record) const {
  const auto s = step(encode(record, *params_), zero_state<float>(hidden()));
  return step(emb_.row(kSos), s);
}

DecoderState<float> Seq2SeqInference::advance(const DecoderState<float>& s, int token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_size()) throw ValidationError("token id outside vocabulary");
  return step(emb_.row(token), s);
}

RowVector<double> Seq2SeqInference::log_probs(const DecoderState<float>& s) const {
  RowVector<float> zf = bp_;
  zf.noalias() += s.m * wp_;
  RowVector<double> z = zf.cast<double>();
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  z.array() -= lse;
  return z;
}

std::vector<GeneratedText> generate_corpus(std::span<const EncodedRecord> records, const ParamStore<float>& params,
                                           const SamplerConfig& config) {
  config.validate();
  std::vector<GeneratedText> out;
  out.reserve(records.size());
  if (records.empty()) return out;
  const Seq2SeqInference model(params);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Seq2SeqDecoder dec(model, records[i]);
    GeneratedText g;
    g.record_index = i;
    switch (config.scheme) {
      case Scheme::Greedy: g.hypothesis = greedy_decode(dec, config.max_len); break;
      case Scheme::Probabilistic: {
        Rng rng = Rng::derive(config.seed, i);
        g.hypothesis = temperature_sample(dec, config.temperature, rng, config.max_len);
        break;
      }
      case Scheme::Beam: g.hypothesis = beam_decode(dec, config.k, config.max_len).front(); break;
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace ccgen
