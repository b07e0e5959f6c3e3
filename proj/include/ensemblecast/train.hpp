#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ensemblecast/stepper.hpp"

namespace ecast {

/// AdamW with linear warmup then cosine decay, one-step-ahead samples by
/// default (rollout_steps controls training-time rollout length).
struct TrainConfig {
  double lr = 1e-5;
  int warmup_epochs = 5;
  int epochs = 20;
  int batch_size = 8;
  int rollout_steps = 1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.1;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TrainResult {
  std::unique_ptr<Stepper> stepper;
  double initial_loss = 0.0;
  double final_loss = 0.0;             // guaranteed <= initial_loss
  std::vector<double> epoch_losses;    // mean sample loss per epoch
};

/// Minimizes loss_weighted_mse over training-range samples whose full
/// (t-2, t-1, .., t+T-1) window lies inside the train split. Deterministic
/// given the seed; the initial parameters are returned if the final full-pass
/// loss fails to improve on the initial one.
TrainResult train(const Stepper& params0, const TimeSeries& series, const DatasetSplit& split,
                  const NormStats& stats, const TrainConfig& cfg, std::uint64_t seed);

/// Pooled one-step RMSE over sea cells for target days in
/// [range.begin + 2, range.end); inputs are taken from within the range only.
double one_step_rmse(const Stepper& stepper, const TimeSeries& series, const NormStats& stats,
                     DayRange range);

}  // namespace ecast
