#ifndef AFFORD_REFNET_TRAIN_HPP_
#define AFFORD_REFNET_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "afford/mapgen/dataset.hpp"
#include "afford/refnet/model.hpp"
#include "afford/refnet/optimizer.hpp"

namespace afford::refnet {

enum class LossMode { kMasked, kUnmasked };

const char* loss_mode_name(LossMode mode);

struct TrainConfig {
  std::size_t epochs_max = 50;
  std::size_t batch_size = 4;
  std::size_t patience = 5;
  bool encoder_train = true;
  LossMode loss_mode = LossMode::kMasked;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct EpochLosses {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct EarlyStoppingResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 if no epoch produced a finite validation loss
  bool stopped_early = false;
};

// Runs epochs 1, 2, ... until epochs_max, or until `patience` epochs have
// passed without a strictly lower validation loss. on_improved(epoch) fires
// whenever an epoch sets a new best, so callers can snapshot state.
EarlyStoppingResult run_with_early_stopping(std::size_t epochs_max, std::size_t patience,
                                            const std::function<EpochLosses(std::size_t)>& run_epoch,
                                            const std::function<void(std::size_t)>& on_improved);

struct TrainResult {
  ModelParams best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Loss of one sample under `mode`; if `grads` is non-null its gradient is
// added there. Samples with an empty mask contribute 0 and no gradient.
struct SampleLoss {
  double value = 0.0;
  bool empty_mask = false;
};
SampleLoss sample_loss(const ModelParams& params, const ModelConfig& config, const mapgen::Sample& sample,
                       LossMode mode, ModelParams* grads = nullptr);

TrainResult train(const ModelConfig& config, const std::vector<mapgen::Sample>& train_set,
                  const std::vector<mapgen::Sample>& val_set, const TrainConfig& tc,
                  const EpochCallback& on_epoch = {});

// Mean per-sample loss over the set (samples with empty masks skipped).
double evaluate_loss(const ModelParams& params, const ModelConfig& config, const std::vector<mapgen::Sample>& samples,
                     LossMode mode);

std::string encode_history(const std::vector<EpochRecord>& history);

}  // namespace afford::refnet

#endif  // AFFORD_REFNET_TRAIN_HPP_
