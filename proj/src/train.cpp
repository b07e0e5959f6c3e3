#include "ensemblecast/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ensemblecast/errors.hpp"
#include "ensemblecast/rng.hpp"

namespace ecast {

void TrainConfig::validate() const {
  if (lr < 0.0 || !std::isfinite(lr))
    fail(Errc::invalid_argument, "train: lr must be non-negative");
  if (epochs < 1) fail(Errc::invalid_argument, "train: epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs > epochs)
    fail(Errc::invalid_argument, "train: warmup must be in [0, epochs]");
  if (batch_size < 1) fail(Errc::invalid_argument, "train: batch_size must be >= 1");
  if (rollout_steps < 1) fail(Errc::invalid_argument, "train: rollout_steps must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    fail(Errc::invalid_argument, "train: betas must be in [0, 1)");
  if (weight_decay < 0.0) fail(Errc::invalid_argument, "train: weight_decay must be >= 0");
}

namespace {

double mean_loss(const Stepper& stepper, const TimeSeries& series, const NormStats& stats,
                 const std::vector<int>& samples, int horizon) {
  double total = 0.0;
  for (const int t0 : samples)
    total += detail::sample_loss_grad(stepper, series, stats, t0, horizon, nullptr);
  return total / static_cast<double>(samples.size());
}

double epoch_lr(const TrainConfig& cfg, int epoch) {
  if (epoch < cfg.warmup_epochs)
    return cfg.lr * static_cast<double>(epoch + 1) / cfg.warmup_epochs;
  const int decay_span = cfg.epochs - cfg.warmup_epochs;
  if (decay_span <= 0) return cfg.lr;
  const double phase =
      std::numbers::pi * static_cast<double>(epoch - cfg.warmup_epochs) / decay_span;
  return cfg.lr * 0.5 * (1.0 + std::cos(phase));
}

}  // namespace

TrainResult train(const Stepper& params0, const TimeSeries& series, const DatasetSplit& split,
                  const NormStats& stats, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  split.validate(series.n_time());

  // X^0 day t0 needs t0-1 and targets t0+1..t0+T inside the train range.
  const int first = split.train.begin + 1;
  const int last = split.train.end - 1 - cfg.rollout_steps;  // inclusive
  if (first > last)
    fail(Errc::invalid_split, "train: train range too short for the sample window");
  std::vector<int> samples;
  samples.reserve(static_cast<std::size_t>(last - first + 1));
  for (int t0 = first; t0 <= last; ++t0) samples.push_back(t0);

  TrainResult res;
  res.stepper = params0.clone();
  Stepper& model = *res.stepper;
  const std::size_t np = model.n_params();

  res.initial_loss = mean_loss(model, series, stats, samples, cfg.rollout_steps);
  if (!std::isfinite(res.initial_loss))
    fail(Errc::diverged_loss, "train: non-finite initial loss");
  const std::vector<double> params_backup(model.param_data(), model.param_data() + np);

  std::vector<double> m(np, 0.0), v(np, 0.0), grad(np, 0.0);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch_lr(cfg, epoch);
    std::vector<int> order = samples;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next() % i]);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b_end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = b; i < b_end; ++i)
        batch_loss += detail::sample_loss_grad(model, series, stats, order[i],
                                               cfg.rollout_steps, &grad);
      if (!std::isfinite(batch_loss))
        fail(Errc::diverged_loss, "train: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;
      const double inv_batch = 1.0 / static_cast<double>(b_end - b);

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      double* p = model.param_data();
      for (std::size_t k = 0; k < np; ++k) {
        const double g = grad[k] * inv_batch;
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        p[k] -= lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * p[k]);
      }
    }
    res.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
  }

  res.final_loss = mean_loss(model, series, stats, samples, cfg.rollout_steps);
  if (!std::isfinite(res.final_loss))
    fail(Errc::diverged_loss, "train: non-finite final loss");
  if (res.final_loss > res.initial_loss) {
    std::copy(params_backup.begin(), params_backup.end(), model.param_data());
    res.final_loss = res.initial_loss;
  }
  return res;
}

double one_step_rmse(const Stepper& stepper, const TimeSeries& series, const NormStats& stats,
                     DayRange range) {
  if (range.size() < 3)
    fail(Errc::invalid_argument, "one_step_rmse: range must cover >= 3 days");
  const GridSpec& g = *series.grid;
  const int i_sst = series.var_index(Var::sst);
  const int i_u = series.var_index(Var::u10);
  const int i_v = series.var_index(Var::v10);
  const int i_b = series.var_index(Var::bathymetry);
  if (i_sst < 0 || i_u < 0 || i_v < 0 || i_b < 0)
    fail(Errc::insufficient_forcing, "one_step_rmse: series lacks required variables");
  const std::vector<std::size_t> sea = g.sea_cells();

  double acc = 0.0;
  long count = 0;
  for (int t = range.begin + 2; t < range.end; ++t) {
    StepInput in;
    in.grid = series.grid;
    in.stats = &stats;
    in.prev2 = series.frame_at(t - 2, i_sst);
    in.prev1 = series.frame_at(t - 1, i_sst);
    in.u10 = series.frame_at(t, i_u);
    in.v10 = series.frame_at(t, i_v);
    in.bathy = series.frame_at(t, i_b);
    in.target_day = series.epoch_day + t;
    const std::vector<float> pred = stepper.step(in);
    const float* truth = series.frame_at(t, i_sst);
    for (const std::size_t c : sea) {
      const double e = static_cast<double>(pred[c]) - static_cast<double>(truth[c]);
      acc += e * e;
      ++count;
    }
  }
  return std::sqrt(acc / static_cast<double>(count));
}

}  // namespace ecast
