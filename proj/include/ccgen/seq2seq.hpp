#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ccgen/nn/tape.hpp"
#include "ccgen/nn/tensor.hpp"
#include "ccgen/schema.hpp"
#include "ccgen/text.hpp"
#include "ccgen/train.hpp"

namespace ccgen {

using nn::Matrix;
using nn::ParamStore;
using nn::RowVector;

inline constexpr std::size_t kDefaultHidden = 128;

struct Seq2SeqDims {
  std::size_t record_dim = 0;
  std::size_t vocab_size = 0;
  std::size_t hidden = kDefaultHidden;
  bool operator==(const Seq2SeqDims&) const = default;
};

// Parameter layout (row-vector convention, y = x W + b):
//   encoder.weight  record_dim x d      encoder.bias  d
//   embedding.weight  V x d
//   lstm.W_{i,f,o,c}x  d x d   lstm.W_{i,f,o,c}m  d x d   lstm.b_{i,f,o,c}  d
//   output.weight  d x V                output.bias  V
// Tensors are zero; use nn::init_params for a random start.
template <typename T>
ParamStore<T> make_seq2seq_params(const Seq2SeqDims& dims);

// Recovers dimensions from a parameter store, validating the layout.
template <typename T>
Seq2SeqDims seq2seq_dims(const ParamStore<T>& params);

template <typename T>
struct DecoderState {
  RowVector<T> m;
  RowVector<T> c;
  // Index of the last input fed: -1 for the record, 0 for SOS, then tokens.
  // A fresh zero state (nothing fed yet) holds -2.
  int t = -2;
};

template <typename T>
DecoderState<T> zero_state(std::size_t hidden);

// x_{-1} = R W_r + b_r. Throws ValidationError on dimension mismatch.
template <typename T>
RowVector<T> encode(const EncodedRecord& record, const ParamStore<T>& params);

// One LSTM step:
//   i = sig(x W_ix + m W_im + b_i)    f = sig(x W_fx + m W_fm + b_f)
//   o = sig(x W_ox + m W_om + b_o)    c' = f * c + i * tanh(x W_cx + m W_cm + b_c)
//   m' = o * tanh(c')
// Throws DivergenceError if the new state is not finite.
template <typename T>
DecoderState<T> lstm_step(const RowVector<T>& x, const DecoderState<T>& state, const ParamStore<T>& params);

// z = m W_p + b_p.
template <typename T>
RowVector<double> output_logits(const DecoderState<T>& state, const ParamStore<T>& params);

// softmax(W_p m + b_p), evaluated in double precision.
template <typename T>
RowVector<double> step_distribution(const DecoderState<T>& state, const ParamStore<T>& params);

// State after the record (t = -1) and SOS (t = 0) have been fed.
template <typename T>
DecoderState<T> start_decoding(const EncodedRecord& record, const ParamStore<T>& params);

// Teacher-forced sum of log p over targets 1..content_len+1 (content then
// EOS). PAD entries after EOS are never read.
template <typename T>
double sequence_log_prob(const EncodedRecord& record, const TokenSequence& sentence, const ParamStore<T>& params);

struct PairView {
  const EncodedRecord* record;
  const TokenSequence* tokens;
};

// Mean over the batch of the per-pair summed negative log-likelihood,
// recorded on the tape. Rows are processed longest-first and finished
// sequences drop out of the recurrence, so PAD never enters the loss.
template <typename T>
typename nn::Tape<T>::Var seq2seq_batch_loss(nn::Tape<T>& tape, std::span<const PairView> batch);

// Forward-only totals over a pair set, evaluated in chunks.
struct LossTotals {
  double nll = 0.0;
  std::size_t tokens = 0;
  std::size_t pairs = 0;
  double per_token() const { return tokens ? nll / static_cast<double>(tokens) : 0.0; }
  double per_pair() const { return pairs ? nll / static_cast<double>(pairs) : 0.0; }
};
LossTotals seq2seq_eval_loss(const ParamStore<float>& params, std::span<const PairView> pairs,
                             std::size_t chunk = 512);

// ---- autoencoder pretraining of the record encoder ----------------------

struct AutoencoderStats {
  std::vector<double> epoch_loss;
  double initial_loss = 0.0;
};

// Linear encoder (record_dim -> d) followed by a linear decoder head
// (d -> record_dim) with sigmoid outputs, trained on summed binary
// cross-entropy (mean over the batch). Returns a store with only
// encoder.weight and encoder.bias.
ParamStore<float> pretrain_autoencoder(std::span<const EncodedRecord> records, std::size_t hidden,
                                       std::size_t epochs, std::size_t batch, double lr, std::uint64_t seed,
                                       AutoencoderStats* stats = nullptr);

// Copies encoder.weight / encoder.bias into a seq2seq store.
void warm_start_encoder(ParamStore<float>& seq2seq, const ParamStore<float>& encoder);

// ---- end-to-end training ------------------------------------------------

// Trains in place with early stopping on per-token validation cross-entropy
// and leaves the best-validation parameters in `params`.
TrainStats train_seq2seq(ParamStore<float>& params, std::span<const PairView> train, std::span<const PairView> valid,
                         const TrainConfig& config, const EpochLogFn& log = nullptr);

}  // namespace ccgen
