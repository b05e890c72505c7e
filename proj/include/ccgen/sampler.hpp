#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccgen/rng.hpp"
#include "ccgen/seq2seq.hpp"
#include "ccgen/text.hpp"

namespace ccgen {

// Anything that can be decoded token by token. log_probs returns the model's
// log-distribution over the whole vocabulary at a state.
template <typename M>
concept StepModel = requires(const M& m, const typename M::State& s, int tok) {
  { m.start() } -> std::convertible_to<typename M::State>;
  { m.advance(s, tok) } -> std::convertible_to<typename M::State>;
  { m.log_probs(s) } -> std::convertible_to<RowVector<double>>;
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
};

enum class Scheme { Greedy, Probabilistic, Beam };
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct SamplerConfig {
  Scheme scheme = Scheme::Greedy;
  double temperature = 1.0;
  std::size_t k = 5;
  std::size_t max_len = kDefaultMaxLen;
  std::uint64_t seed = 0;

  // Throws ValidationError for t <= 0 or k == 0.
  void validate() const;
  // "greedy", "prob_t0.5", "beam_k5", ...
  std::string label() const;
};

struct Hypothesis {
  std::vector<int> tokens;  // content tokens, no SOS/EOS
  double log_prob = 0.0;
  bool finished = false;  // ended by EOS or reached max_len
  bool ended_with_eos = false;

  TokenSequence sequence(std::size_t max_len) const { return make_sequence(tokens, max_len); }
};

namespace detail {

inline int first_emissible() { return kEos; }

inline int argmax_emissible(const RowVector<double>& lp) {
  int best = first_emissible();
  for (int i = best + 1; i < static_cast<int>(lp.size()); ++i) {
    if (lp(i) > lp(best)) best = i;
  }
  return best;
}

}  // namespace detail

// Argmax at every step (ties to the lowest id); PAD and SOS are never chosen.
template <StepModel M>
Hypothesis greedy_decode(const M& model, std::size_t max_len = kDefaultMaxLen) {
  Hypothesis h;
  auto state = model.start();
  while (true) {
    const RowVector<double> lp = model.log_probs(state);
    const int tok = detail::argmax_emissible(lp);
    h.log_prob += lp(tok);
    if (tok == kEos) {
      h.ended_with_eos = true;
      break;
    }
    h.tokens.push_back(tok);
    if (h.tokens.size() >= max_len) break;
    state = model.advance(state, tok);
  }
  h.finished = true;
  return h;
}

// Per-step record of a temperature draw, for diagnostics.
struct SampleTrace {
  std::size_t steps = 0;
  std::size_t matched_argmax = 0;
};

// Samples each token from softmax(z / t) over the emissible ids (EOS and
// content). The reported log_prob uses the model's unmodified distribution.
template <StepModel M>
Hypothesis temperature_sample(const M& model, double t, Rng& rng, std::size_t max_len = kDefaultMaxLen,
                              SampleTrace* trace = nullptr) {
  if (!(t > 0.0)) throw ValidationError("temperature must be positive");
  Hypothesis h;
  auto state = model.start();
  std::vector<double> w;
  while (true) {
    const RowVector<double> lp = model.log_probs(state);
    const int first = detail::first_emissible();
    const auto n = static_cast<std::size_t>(lp.size() - first);
    double mx = lp(first);
    for (Eigen::Index i = first; i < lp.size(); ++i) mx = std::max(mx, lp(i));
    w.resize(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp((lp(first + static_cast<Eigen::Index>(i)) - mx) / t);
    const int tok = first + static_cast<int>(rng.categorical(w));
    if (trace) {
      ++trace->steps;
      if (tok == detail::argmax_emissible(lp)) ++trace->matched_argmax;
    }
    h.log_prob += lp(tok);
    if (tok == kEos) {
      h.ended_with_eos = true;
      break;
    }
    h.tokens.push_back(tok);
    if (h.tokens.size() >= max_len) break;
    state = model.advance(state, tok);
  }
  h.finished = true;
  return h;
}

// Beam search on raw cumulative log-probability. Each round expands every
// live hypothesis over the emissible ids and keeps the k best candidates,
// ordered by (score desc, parent rank, token id). Candidates ending in EOS or
// reaching max_len retire to the completed pool. Stops once k hypotheses have
// completed, no live hypothesis remains, or max_len + 1 rounds have run.
// Returns up to k hypotheses, completed first by score, then the best live.
template <StepModel M>
std::vector<Hypothesis> beam_decode(const M& model, std::size_t k, std::size_t max_len = kDefaultMaxLen) {
  if (k == 0) throw ValidationError("beam width must be positive");
  using State = typename M::State;
  struct Live {
    Hypothesis h;
    State state;
  };
  struct Cand {
    double score;
    std::size_t parent;
    int token;
  };
  std::vector<Live> live;
  live.push_back({Hypothesis{}, model.start()});
  std::vector<Hypothesis> completed;
  std::vector<Cand> cands;
  for (std::size_t round = 0; round <= max_len && !live.empty() && completed.size() < k; ++round) {
    cands.clear();
    for (std::size_t p = 0; p < live.size(); ++p) {
      const RowVector<double> lp = model.log_probs(live[p].state);
      for (int tok = detail::first_emissible(); tok < static_cast<int>(lp.size()); ++tok) {
        cands.push_back({live[p].h.log_prob + lp(tok), p, tok});
      }
    }
    const std::size_t keep = std::min(k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Cand& a, const Cand& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Live> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands[i];
      Hypothesis h = live[c.parent].h;
      h.log_prob = c.score;
      if (c.token == kEos) {
        h.finished = true;
        h.ended_with_eos = true;
        completed.push_back(std::move(h));
        continue;
      }
      h.tokens.push_back(c.token);
      if (h.tokens.size() >= max_len) {
        h.finished = true;
        completed.push_back(std::move(h));
        continue;
      }
      State s = model.advance(live[c.parent].state, c.token);
      next.push_back({std::move(h), std::move(s)});
    }
    live = std::move(next);
  }
  std::stable_sort(completed.begin(), completed.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.log_prob > b.log_prob; });
  if (completed.size() > k) completed.resize(k);
  for (std::size_t i = 0; completed.size() < k && i < live.size(); ++i) completed.push_back(live[i].h);
  return completed;
}

// Inference-time view of trained seq2seq parameters with the four gate
// matrices fused for speed. Produces the same states as lstm_step.
class Seq2SeqInference {
 public:
  explicit Seq2SeqInference(const ParamStore<float>& params);

  std::size_t vocab_size() const { return static_cast<std::size_t>(emb_.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(emb_.cols()); }

  DecoderState<float> start(const EncodedRecord& record) const;
  DecoderState<float> advance(const DecoderState<float>& s, int token) const;
  RowVector<double> log_probs(const DecoderState<float>& s) const;

 private:
  DecoderState<float> step(const RowVector<float>& x, const DecoderState<float>& s) const;

  const ParamStore<float>* params_;
  Matrix<float> wx_;  // d x 4d, gate order i f o c
  Matrix<float> wm_;
  RowVector<float> b_;
  Matrix<float> emb_;
  Matrix<float> wp_;
  RowVector<float> bp_;
};

// Binds a record to a Seq2SeqInference so it satisfies StepModel.
class Seq2SeqDecoder {
 public:
  using State = DecoderState<float>;
  Seq2SeqDecoder(const Seq2SeqInference& model, const EncodedRecord& record) : model_(&model), record_(&record) {}

  State start() const { return model_->start(*record_); }
  State advance(const State& s, int token) const { return model_->advance(s, token); }
  RowVector<double> log_probs(const State& s) const { return model_->log_probs(s); }
  std::size_t vocab_size() const { return model_->vocab_size(); }

 private:
  const Seq2SeqInference* model_;
  const EncodedRecord* record_;
};

struct GeneratedText {
  std::size_t record_index = 0;
  Hypothesis hypothesis;
};

// One output per record, order-aligned. Beam uses the top-1 hypothesis;
// probabilistic sampling draws from a per-record stream derived from
// (seed, record index).
std::vector<GeneratedText> generate_corpus(std::span<const EncodedRecord> records, const ParamStore<float>& params,
                                           const SamplerConfig& config);

}  // namespace ccgen
