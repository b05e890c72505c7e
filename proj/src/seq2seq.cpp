#include "ccgen/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "ccgen/nn/optim.hpp"

namespace ccgen {

namespace {

const char* const kGates[4] = {"i", "f", "o", "c"};

std::string gate_name(const char* gate, const char* kind) {
  return std::string("lstm.") + (std::string(kind) == "b" ? "b_" : "W_") + gate +
         (std::string(kind) == "b" ? "" : kind);
}

template <typename T>
const Matrix<T>& P(const ParamStore<T>& p, const std::string& name) {
  return p.at(name).data;
}

template <typename T>
void check_record(const EncodedRecord& record, const ParamStore<T>& params) {
  const auto rows = static_cast<std::size_t>(params.at("encoder.weight").data.rows());
  if (record.bits.size() != rows) {
    throw ValidationError("record has " + std::to_string(record.bits.size()) + " bits, model expects " +
                          std::to_string(rows));
  }
}

template <typename T>
void check_sequence(const TokenSequence& s, std::size_t vocab) {
  if (s.ids.size() < s.content_len + 2 || s.ids[0] != kSos || s.ids[s.content_len + 1] != kEos) {
    throw ValidationError("malformed token sequence");
  }
  for (std::size_t i = 0; i < s.content_len + 2; ++i) {
    if (s.ids[i] < 0 || static_cast<std::size_t>(s.ids[i]) >= vocab) {
      throw ValidationError("token id " + std::to_string(s.ids[i]) + " outside model vocabulary");
    }
  }
}

template <typename T>
struct TapeState {
  typename nn::Tape<T>::Var m;
  typename nn::Tape<T>::Var c;
};

template <typename T>
TapeState<T> tape_lstm_step(nn::Tape<T>& t, typename nn::Tape<T>::Var x, TapeState<T> s) {
  auto gate = [&](const char* g) {
    auto pre = t.add(t.matmul(x, t.param(gate_name(g, "x"))), t.matmul(s.m, t.param(gate_name(g, "m"))));
    return t.add_bias(pre, t.param(gate_name(g, "b")));
  };
  auto i = t.sigmoid(gate("i"));
  auto f = t.sigmoid(gate("f"));
  auto o = t.sigmoid(gate("o"));
  auto cand = t.tanh(gate("c"));
  auto c = t.add(t.mul(f, s.c), t.mul(i, cand));
  auto m = t.mul(o, t.tanh(c));
  return {m, c};
}

// Builds factor * (summed NLL over the batch). Returns the loss node and the
// number of predicted tokens.
template <typename T>
typename nn::Tape<T>::Var build_loss(nn::Tape<T>& t, std::span<const PairView> batch, T factor,
                                     std::size_t* n_tokens) {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  const auto& W_r = t.value(t.param("encoder.weight"));
  const auto D = W_r.rows();
  const auto d = W_r.cols();
  const auto V = static_cast<std::size_t>(t.value(t.param("embedding.weight")).rows());

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return batch[a].tokens->content_len > batch[b].tokens->content_len;
  });

  const auto B = static_cast<Eigen::Index>(batch.size());
  Matrix<T> R = Matrix<T>::Zero(B, D);
  std::size_t tokens = 0;
  for (Eigen::Index r = 0; r < B; ++r) {
    const auto& pv = batch[order[static_cast<std::size_t>(r)]];
    if (static_cast<Eigen::Index>(pv.record->bits.size()) != D) {
      throw ValidationError("record dimension does not match the encoder");
    }
    check_sequence<T>(*pv.tokens, V);
    for (Eigen::Index j = 0; j < D; ++j) R(r, j) = pv.record->bits[static_cast<std::size_t>(j)] ? T(1) : T(0);
    tokens += pv.tokens->content_len + 1;
  }
  if (n_tokens) *n_tokens = tokens;

  auto x = t.add_bias(t.matmul(t.constant(std::move(R)), t.param("encoder.weight")), t.param("encoder.bias"));
  TapeState<T> s{t.constant(Matrix<T>::Zero(B, d)), t.constant(Matrix<T>::Zero(B, d))};
  s = tape_lstm_step(t, x, s);

  const std::size_t longest = batch[order[0]].tokens->content_len;
  std::size_t rows = batch.size();
  std::optional<typename nn::Tape<T>::Var> loss;
  std::vector<int> inputs;
  std::vector<int> targets;
  for (std::size_t pos = 0; pos <= longest; ++pos) {
    std::size_t n = 0;
    while (n < rows && batch[order[n]].tokens->content_len >= pos) ++n;
    if (n < rows) {
      s.m = t.top_rows(s.m, n);
      s.c = t.top_rows(s.c, n);
      rows = n;
    }
    inputs.resize(n);
    targets.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const auto& ids = batch[order[r]].tokens->ids;
      inputs[r] = ids[pos];
      targets[r] = ids[pos + 1];
    }
    s = tape_lstm_step(t, t.embedding(t.param("embedding.weight"), inputs), s);
    auto logits = t.add_bias(t.matmul(s.m, t.param("output.weight")), t.param("output.bias"));
    auto ce = t.cross_entropy(logits, targets, factor);
    loss = loss ? t.add(*loss, ce) : ce;
  }
  return *loss;
}

}  // namespace

template <typename T>
ParamStore<T> make_seq2seq_params(const Seq2SeqDims& dims) {
  if (dims.record_dim == 0 || dims.vocab_size <= static_cast<std::size_t>(kReservedTokens) || dims.hidden == 0) {
    throw ValidationError("seq2seq: record_dim, hidden must be positive and vocab must exceed the reserved ids");
  }
  ParamStore<T> p;
  const auto d = dims.hidden;
  p.add("encoder.weight", {dims.record_dim, d});
  p.add("encoder.bias", {d});
  p.add("embedding.weight", {dims.vocab_size, d});
  for (const char* g : kGates) {
    p.add(gate_name(g, "x"), {d, d});
    p.add(gate_name(g, "m"), {d, d});
    p.add(gate_name(g, "b"), {d});
  }
  p.add("output.weight", {d, dims.vocab_size});
  p.add("output.bias", {dims.vocab_size});
  return p;
}

template <typename T>
Seq2SeqDims seq2seq_dims(const ParamStore<T>& params) {
  Seq2SeqDims dims;
  try {
    const auto& enc = params.at("encoder.weight");
    const auto& emb = params.at("embedding.weight");
    dims.record_dim = enc.rows();
    dims.hidden = enc.cols();
    dims.vocab_size = emb.rows();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("not a seq2seq checkpoint: ") + e.what());
  }
  const auto expected = make_seq2seq_params<T>(dims);
  if (!expected.same_layout(params)) throw ValidationError("seq2seq checkpoint has an unexpected tensor layout");
  return dims;
}

template <typename T>
DecoderState<T> zero_state(std::size_t hidden) {
  DecoderState<T> s;
  s.m = RowVector<T>::Zero(static_cast<Eigen::Index>(hidden));
  s.c = RowVector<T>::Zero(static_cast<Eigen::Index>(hidden));
  s.t = -2;
  return s;
}

template <typename T>
RowVector<T> encode(const EncodedRecord& record, const ParamStore<T>& params) {
  check_record(record, params);
  const auto& W = P(params, "encoder.weight");
  RowVector<T> x = P(params, "encoder.bias").row(0);
  for (std::size_t j = 0; j < record.bits.size(); ++j) {
    if (record.bits[j]) x += W.row(static_cast<Eigen::Index>(j));
  }
  return x;
}

template <typename T>
DecoderState<T> lstm_step(const RowVector<T>& x, const DecoderState<T>& s, const ParamStore<T>& params) {
  auto gate = [&](const char* g) -> RowVector<T> {
    return x * P(params, gate_name(g, "x")) + s.m * P(params, gate_name(g, "m")) + P(params, gate_name(g, "b")).row(0);
  };
  auto sig = [](const RowVector<T>& v) -> RowVector<T> { return (T(1) / (T(1) + (-v.array()).exp())).matrix(); };
  const RowVector<T> i = sig(gate("i"));
  const RowVector<T> f = sig(gate("f"));
  const RowVector<T> o = sig(gate("o"));
  const RowVector<T> cand = gate("c").array().tanh().matrix();
  DecoderState<T> out;
  out.c = f.cwiseProduct(s.c) + i.cwiseProduct(cand);
  out.m = o.cwiseProduct(RowVector<T>(out.c.array().tanh().matrix()));
  out.t = s.t + 1;
  if (!out.m.allFinite() || !out.c.allFinite()) throw DivergenceError("lstm_step: non-finite state");
  return out;
}

template <typename T>
RowVector<double> output_logits(const DecoderState<T>& state, const ParamStore<T>& params) {
  RowVector<T> z = state.m * P(params, "output.weight") + P(params, "output.bias").row(0);
  return z.template cast<double>();
}

template <typename T>
RowVector<double> step_distribution(const DecoderState<T>& state, const ParamStore<T>& params) {
  RowVector<double> z = output_logits(state, params);
  z.array() -= z.maxCoeff();
  z = z.array().exp().matrix();
  z /= z.sum();
  return z;
}

template <typename T>
DecoderState<T> start_decoding(const EncodedRecord& record, const ParamStore<T>& params) {
  const auto& emb = P(params, "embedding.weight");
  auto s = lstm_step<T>(encode(record, params), zero_state<T>(static_cast<std::size_t>(emb.cols())), params);
  return lstm_step<T>(emb.row(kSos), s, params);
}

template <typename T>
double sequence_log_prob(const EncodedRecord& record, const TokenSequence& sentence, const ParamStore<T>& params) {
  const auto& emb = P(params, "embedding.weight");
  check_sequence<T>(sentence, static_cast<std::size_t>(emb.rows()));
  auto s = start_decoding(record, params);
  double total = 0.0;
  for (std::size_t pos = 1; pos <= sentence.content_len + 1; ++pos) {
    RowVector<double> z = output_logits(s, params);
    const double mx = z.maxCoeff();
    const double lse = mx + std::log((z.array() - mx).exp().sum());
    const int target = sentence.ids[pos];
    total += z(target) - lse;
    if (pos <= sentence.content_len) s = lstm_step<T>(emb.row(target), s, params);
  }
  return total;
}

template <typename T>
typename nn::Tape<T>::Var seq2seq_batch_loss(nn::Tape<T>& tape, std::span<const PairView> batch) {
  return build_loss<T>(tape, batch, T(1) / static_cast<T>(batch.size()), nullptr);
}

LossTotals seq2seq_eval_loss(const ParamStore<float>& params, std::span<const PairView> pairs, std::size_t chunk) {
  LossTotals totals;
  for (std::size_t start = 0; start < pairs.size(); start += chunk) {
    const auto part = pairs.subspan(start, std::min(chunk, pairs.size() - start));
    nn::Tape<float> tape(&params);
    std::size_t tokens = 0;
    auto loss = build_loss<float>(tape, part, 1.0f, &tokens);
    totals.nll += static_cast<double>(tape.scalar(loss));
    totals.tokens += tokens;
    totals.pairs += part.size();
  }
  return totals;
}

ParamStore<float> pretrain_autoencoder(std::span<const EncodedRecord> records, std::size_t hidden, std::size_t epochs,
                                       std::size_t batch, double lr, std::uint64_t seed, AutoencoderStats* stats) {
  if (records.empty()) throw ValidationError("pretrain_autoencoder: no records");
  const std::size_t D = records[0].bits.size();
  for (const auto& r : records) {
    if (r.bits.size() != D) throw ValidationError("pretrain_autoencoder: records differ in dimension");
  }
  ParamStore<float> p;
  p.add("encoder.weight", {D, hidden});
  p.add("encoder.bias", {hidden});
  p.add("decoder.weight", {hidden, D});
  p.add("decoder.bias", {D});
  nn::init_params(p, seed);

  auto dense = [&](std::span<const std::size_t> idx) {
    Matrix<float> R = Matrix<float>::Zero(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(D));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto& bits = records[idx[r]].bits;
      for (std::size_t j = 0; j < D; ++j) {
        if (bits[j]) R(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = 1.0f;
      }
    }
    return R;
  };
  auto batch_loss = [&](nn::Tape<float>& t, std::span<const std::size_t> idx) {
    Matrix<float> R = dense(idx);
    auto h = t.add_bias(t.matmul(t.constant(R), t.param("encoder.weight")), t.param("encoder.bias"));
    auto logits = t.add_bias(t.matmul(h, t.param("decoder.weight")), t.param("decoder.bias"));
    return t.sigmoid_cross_entropy(logits, R, 1.0f / static_cast<float>(idx.size()));
  };
  auto full_loss = [&](const ParamStore<float>& params) {
    double total = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < records.size(); start += 1024) {
      idx.clear();
      for (std::size_t i = start; i < std::min(records.size(), start + 1024); ++i) idx.push_back(i);
      nn::Tape<float> t(&params);
      total += static_cast<double>(t.scalar(batch_loss(t, idx))) * static_cast<double>(idx.size());
    }
    return total / static_cast<double>(records.size());
  };

  if (stats) stats->initial_loss = full_loss(p);
  if (epochs > 0) {
    TrainConfig cfg;
    cfg.lr = lr;
    cfg.batch = batch;
    cfg.max_epochs = epochs;
    cfg.seed = seed;
    const auto ts = fit(p, records.size(), batch_loss, nullptr, cfg);
    if (stats) stats->epoch_loss = ts.train_loss;
  }
  ParamStore<float> enc;
  enc.add("encoder.weight", {D, hidden});
  enc.add("encoder.bias", {hidden});
  enc[0].data = p.at("encoder.weight").data;
  enc[1].data = p.at("encoder.bias").data;
  return enc;
}

void warm_start_encoder(ParamStore<float>& seq2seq, const ParamStore<float>& encoder) {
  for (const char* name : {"encoder.weight", "encoder.bias"}) {
    auto& dst = seq2seq.at(name);
    const auto& src = encoder.at(name);
    if (dst.shape != src.shape) throw ValidationError(std::string("warm start: shape mismatch for ") + name);
    dst.data = src.data;
  }
}

TrainStats train_seq2seq(ParamStore<float>& params, std::span<const PairView> train, std::span<const PairView> valid,
                         const TrainConfig& config, const EpochLogFn& log) {
  if (train.empty() || valid.empty()) throw ValidationError("train_seq2seq: empty split");
  std::vector<PairView> scratch;
  auto batch_loss = [&](nn::Tape<float>& t, std::span<const std::size_t> idx) {
    scratch.clear();
    for (auto i : idx) scratch.push_back(train[i]);
    return seq2seq_batch_loss<float>(t, scratch);
  };
  auto valid_loss = [&](const ParamStore<float>& p) { return seq2seq_eval_loss(p, valid).per_token(); };
  return fit(params, train.size(), batch_loss, valid_loss, config, log);
}

#define CCGEN_INSTANTIATE(T)                                                                                     \
  template ParamStore<T> make_seq2seq_params<T>(const Seq2SeqDims&);                                           \
  template Seq2SeqDims seq2seq_dims<T>(const ParamStore<T>&);                                                  \
  template DecoderState<T> zero_state<T>(std::size_t);                                                          \
  template RowVector<T> encode<T>(const EncodedRecord&, const ParamStore<T>&);                                  \
  template DecoderState<T> lstm_step<T>(const RowVector<T>&, const DecoderState<T>&, const ParamStore<T>&);     \
  template RowVector<double> output_logits<T>(const DecoderState<T>&, const ParamStore<T>&);                    \
  template RowVector<double> step_distribution<T>(const DecoderState<T>&, const ParamStore<T>&);                \
  template DecoderState<T> start_decoding<T>(const EncodedRecord&, const ParamStore<T>&);                       \
  template double sequence_log_prob<T>(const EncodedRecord&, const TokenSequence&, const ParamStore<T>&);       \
  template typename nn::Tape<T>::Var seq2seq_batch_loss<T>(nn::Tape<T>&, std::span<const PairView>);

CCGEN_INSTANTIATE(float)
CCGEN_INSTANTIATE(double)
#undef CCGEN_INSTANTIATE

}  // namespace ccgen
