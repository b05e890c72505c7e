#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccgen/nn/tape.hpp"
#include "ccgen/nn/tensor.hpp"
#include "ccgen/train.hpp"

namespace ccgen {

struct ClassifierDims {
  std::size_t vocab_size = 0;
  std::size_t embed = 200;
  std::size_t hidden = 100;
  std::size_t classes = 0;
  bool operator==(const ClassifierDims&) const = default;
};

// Layout:
//   embedding.weight  V x E
//   {fwd,bwd}.W_{z,r,h}  E x H    {fwd,bwd}.U_{z,r,h}  H x H    {fwd,bwd}.b_{z,r,h}  H
//   head.weight  2H x C           head.bias  C
// GRU step (per direction):
//   z = sig(x W_z + h U_z + b_z)     r = sig(x W_r + h U_r + b_r)
//   g = tanh(x W_h + (r * h) U_h + b_h)
//   h' = z * h + (1 - z) * g
// The forward direction reads content left to right, the backward direction
// right to left starting at the last content token; the head sees
// [h_fwd, h_bwd].
template <typename T>
nn::ParamStore<T> make_classifier_params(const ClassifierDims& dims);

template <typename T>
ClassifierDims classifier_dims(const nn::ParamStore<T>& params);

using Sentence = std::span<const int>;

// Class logits (B x C) for a batch of content-token sentences. An empty
// sentence leaves both directions at the zero state.
template <typename T>
typename nn::Tape<T>::Var classifier_logits(nn::Tape<T>& tape, std::span<const Sentence> batch);

// Mean cross-entropy over the batch; labels of -1 are ignored.
template <typename T>
typename nn::Tape<T>::Var classifier_batch_loss(nn::Tape<T>& tape, std::span<const Sentence> batch,
                                                std::span<const int> labels);

// Class distribution for one sentence. Throws ValidationError on empty
// content.
template <typename T>
nn::RowVector<double> bigru_forward(Sentence content, const nn::ParamStore<T>& params);

// Argmax class per sentence (ties to the lowest class).
std::vector<int> classify(const nn::ParamStore<float>& params, std::span<const Sentence> sentences,
                          std::size_t chunk = 256);

struct ClassificationReport {
  double sens = 0.0;
  double ppv = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::map<int, std::size_t> support;
  std::size_t pairs = 0;

  nlohmann::json to_json() const;
};

// Support-weighted averages of one-vs-rest recall, precision and F1; a class
// never predicted has precision 0.
ClassificationReport weighted_metrics(std::span<const int> predictions, std::span<const int> truth);

TrainStats train_classifier(nn::ParamStore<float>& params, std::span<const Sentence> train,
                            std::span<const int> train_labels, std::span<const Sentence> valid,
                            std::span<const int> valid_labels, const TrainConfig& config,
                            const EpochLogFn& log = nullptr);

struct TransferResult {
  ClassificationReport authentic;
  ClassificationReport synthetic;
};

// Scores the classifier on authentic sentences and on synthetic sentences
// generated from the same records (same labels, same order).
TransferResult transfer_eval(const nn::ParamStore<float>& params, std::span<const Sentence> authentic,
                             std::span<const Sentence> synthetic, std::span<const int> labels);

}  // namespace ccgen
