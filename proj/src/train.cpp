#include "ccgen/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "ccgen/rng.hpp"

namespace ccgen {

std::string to_string(StopReason r) {
  return r == StopReason::PatienceExhausted ? "patience-exhausted" : "max-epochs";
}

bool EarlyStopping::observe(double loss) {
  ++epoch_;
  if (epoch_ == 1 || loss < best_) {
    best_ = loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

TrainStats fit(nn::ParamStore<float>& params, std::size_t n_train, const BatchLossFn& batch_loss,
               const ValidLossFn& valid_loss, const TrainConfig& config, const EpochLogFn& log) {
  if (n_train == 0) throw ValidationError("training split is empty");
  if (config.batch == 0) throw ValidationError("batch size must be positive");

  nn::AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  adam_cfg.clip_norm = config.clip_norm;
  nn::Adam<float> opt(params, adam_cfg);
  EarlyStopping stopper(config.patience);
  nn::ParamStore<float> best = params;

  TrainStats stats;
  std::vector<std::size_t> order(n_train);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(config.seed, epoch);
    rng.shuffle(order.begin(), order.end());

    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_train; start += config.batch) {
      const std::size_t end = std::min(n_train, start + config.batch);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      nn::Tape<float> tape(&params);
      auto loss = batch_loss(tape, idx);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      opt.step(params, tape.gradients());
      total += value;
      ++batches;
    }
    stats.train_loss.push_back(total / static_cast<double>(batches));
    stats.epochs = epoch;

    double vloss = std::numeric_limits<double>::quiet_NaN();
    if (valid_loss) {
      vloss = valid_loss(params);
      if (!std::isfinite(vloss)) throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
      stats.valid_loss.push_back(vloss);
      if (stopper.observe(vloss)) best = params;
    }
    if (log) log(epoch, stats.train_loss.back(), vloss);
    if (valid_loss && stopper.should_stop()) {
      stats.stop_reason = StopReason::PatienceExhausted;
      break;
    }
  }
  if (valid_loss && stats.epochs > 0) {
    params = best;
    stats.best_epoch = stopper.best_epoch();
  }
  stats.skipped_updates = opt.skipped();
  return stats;
}

}  // namespace ccgen
