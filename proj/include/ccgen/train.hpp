#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccgen/nn/optim.hpp"
#include "ccgen/nn/tape.hpp"

namespace ccgen {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 512;
  std::size_t patience = 2;
  std::size_t max_epochs = 50;
  double clip_norm = 0.0;
  std::uint64_t seed = 0;
};

enum class StopReason { PatienceExhausted, MaxEpochs };
std::string to_string(StopReason r);

struct TrainStats {
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
  std::size_t epochs = 0;
  // 1-based epoch whose parameters were kept (0 when no validation set).
  std::size_t best_epoch = 0;
  StopReason stop_reason = StopReason::MaxEpochs;
  std::size_t skipped_updates = 0;
};

// Stop once the validation loss has failed to strictly improve on the best
// value for `patience` consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when the value is a new best.
  bool observe(double loss);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t bad_epochs_ = 0;
  double best_ = 0.0;
};

// Builds the mean loss of one mini-batch (indices into the training set) on
// the tape.
using BatchLossFn = std::function<nn::Tape<float>::Var(nn::Tape<float>&, std::span<const std::size_t>)>;
// Validation loss at the given parameters.
using ValidLossFn = std::function<double(const nn::ParamStore<float>&)>;
// Called after each epoch with (epoch, train loss, validation loss or NaN).
using EpochLogFn = std::function<void(std::size_t, double, double)>;

// Mini-batch Adam over a seeded per-epoch shuffle of [0, n_train). With a
// validation function, applies early stopping and restores the parameters of
// the best epoch; without one, runs exactly max_epochs.
TrainStats fit(nn::ParamStore<float>& params, std::size_t n_train, const BatchLossFn& batch_loss,
               const ValidLossFn& valid_loss, const TrainConfig& config, const EpochLogFn& log = nullptr);

}  // namespace ccgen
