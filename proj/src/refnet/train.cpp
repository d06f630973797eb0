#include "afford/refnet/train.hpp"

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "afford/core/errors.hpp"
#include "afford/core/rng.hpp"
#include "afford/evalkit/loss.hpp"

namespace afford::refnet {

namespace {

void check_dimensions(const ModelConfig& config, const std::vector<mapgen::Sample>& samples, std::size_t h,
                      std::size_t w, const char* which) {
  for (const auto& s : samples) {
    s.validate();
    if (s.height() != h || s.width() != w) {
      throw ArgumentError(std::string(which) + " sample '" + s.source_id + "' is " + std::to_string(s.height()) + "x" +
                          std::to_string(s.width()) + ", expected " + std::to_string(h) + "x" + std::to_string(w));
    }
  }
  config.check_input(h, w);
}

}  // namespace

const char* loss_mode_name(LossMode mode) { return mode == LossMode::kMasked ? "masked" : "unmasked"; }

void TrainConfig::validate() const {
  if (patience < 1) throw ArgumentError("patience must be >= 1");
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (epochs_max < 1) throw ArgumentError("epochs_max must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
  if (!(decay >= 0.0 && decay < 1.0)) throw ArgumentError("decay must be in [0, 1)");
}

EarlyStoppingResult run_with_early_stopping(std::size_t epochs_max, std::size_t patience,
                                            const std::function<EpochLosses(std::size_t)>& run_epoch,
                                            const std::function<void(std::size_t)>& on_improved) {
  EarlyStoppingResult result;
  double best = std::numeric_limits<double>::infinity();
  std::size_t last_improvement = 0;
  for (std::size_t epoch = 1; epoch <= epochs_max; ++epoch) {
    const EpochLosses losses = run_epoch(epoch);
    result.history.push_back(EpochRecord{epoch, losses.train_loss, losses.val_loss});
    if (std::isfinite(losses.val_loss) && losses.val_loss < best) {
      best = losses.val_loss;
      result.best_epoch = epoch;
      last_improvement = epoch;
      if (on_improved) on_improved(epoch);
    }
    if (epoch - last_improvement >= patience) {
      result.stopped_early = epoch < epochs_max;
      break;
    }
  }
  return result;
}

SampleLoss sample_loss(const ModelParams& params, const ModelConfig& config, const mapgen::Sample& sample,
                       LossMode mode, ModelParams* grads) {
  auto fwd = forward(params, config, sample.image);
  const std::size_t pixels = sample.image.pixels();
  const std::span<const std::uint8_t> mask =
      mode == LossMode::kMasked ? sample.mask.valid() : std::span<const std::uint8_t>{};
  if (grads == nullptr) {
    const auto loss = evalkit::masked_bce(sample.target.values(), fwd.output.values(), mask, pixels);
    return {loss.value, loss.empty_mask};
  }
  std::vector<double> grad_output(fwd.output.size());
  const auto loss = evalkit::masked_bce_grad(sample.target.values(), fwd.output.values(), mask, pixels, grad_output);
  if (!loss.empty_mask) backward_accumulate(params, fwd.cache, grad_output, *grads);
  return {loss.value, loss.empty_mask};
}

double evaluate_loss(const ModelParams& params, const ModelConfig& config, const std::vector<mapgen::Sample>& samples,
                     LossMode mode) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& s : samples) {
    const auto loss = sample_loss(params, config, s, mode);
    if (loss.empty_mask) continue;
    sum += loss.value;
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

TrainResult train(const ModelConfig& config, const std::vector<mapgen::Sample>& train_set,
                  const std::vector<mapgen::Sample>& val_set, const TrainConfig& tc, const EpochCallback& on_epoch) {
  config.validate();
  tc.validate();
  if (train_set.empty()) throw ArgumentError("training set is empty");
  if (val_set.empty()) throw ArgumentError("validation set is empty");
  const std::size_t h = train_set.front().height();
  const std::size_t w = train_set.front().width();
  check_dimensions(config, train_set, h, w, "training");
  check_dimensions(config, val_set, h, w, "validation");

  ModelParams params = ModelParams::initialize(config);
  OptimizerState state = OptimizerState::for_params(params, tc.learning_rate, tc.decay, tc.epsilon);
  const FrozenSet frozen = tc.encoder_train ? nothing_frozen(params) : encoder_frozen(params);
  ModelParams grads = params.zeros_like();

  TrainResult result;
  result.best = params;

  const auto run_epoch = [&](std::size_t epoch) {
    const auto order = mapgen::shuffled_indices(train_set.size(), splitmix64(tc.seed) ^ epoch);
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      grads.set_zero();
      for (std::size_t b = start; b < end; ++b) {
        const auto loss = sample_loss(params, config, train_set[order[b]], tc.loss_mode, &grads);
        if (loss.empty_mask) continue;
        loss_sum += loss.value;
        ++counted;
      }
      grads.scale(1.0 / static_cast<double>(end - start));
      rmsprop_step(params, grads, state, frozen);
    }
    EpochLosses losses;
    losses.train_loss = counted == 0 ? 0.0 : loss_sum / static_cast<double>(counted);
    losses.val_loss = evaluate_loss(params, config, val_set, tc.loss_mode);
    if (on_epoch) on_epoch(EpochRecord{epoch, losses.train_loss, losses.val_loss});
    return losses;
  };

  auto stopping = run_with_early_stopping(tc.epochs_max, tc.patience, run_epoch,
                                          [&](std::size_t) { result.best = params; });
  result.history = std::move(stopping.history);
  result.best_epoch = stopping.best_epoch;
  result.stopped_early = stopping.stopped_early;
  return result;
}

std::string encode_history(const std::vector<EpochRecord>& history) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : history) {
    j.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}});
  }
  return j.dump(2) + "\n";
}

}  // namespace afford::refnet
