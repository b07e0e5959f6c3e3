#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ensemblecast/noise.hpp"
#include "ensemblecast/stepper.hpp"

namespace ecast {

struct EnsembleConfig {
  int members = 5;
  NoiseConfig noise = GaussianCfg{};
  std::uint64_t base_seed = 0;
  int horizon = 1;

  /// SingleMember if members < 2; horizon must be >= 1.
  void validate() const;
};

struct EnsembleForecast {
  EnsembleConfig config;
  int start_day = 0;             // series day index of X^0
  std::int64_t epoch_day = 0;    // absolute day of lead 1
  std::vector<Trajectory> members;
  Trajectory mean;

  int n_members() const noexcept { return static_cast<int>(members.size()); }
};

/// Per-lead, per-cell arithmetic mean, accumulated in member order.
Trajectory ensemble_mean(const std::vector<Trajectory>& members);

/// Member m perturbs the two initial states with seed mix_seed(base_seed, m)
/// and rolls out cfg.horizon steps. Only the initial oceanographic states are
/// perturbed; forcings and parameters never are. Members are independent and
/// the mean reduction runs in member order, so the forecast is bit-identical
/// for any thread count.
EnsembleForecast run_ensemble(const Stepper& stepper, const NormStats& stats,
                              const Field& x_prev, const Field& x_curr,
                              const TimeSeries& forcing, int first_target,
                              const EnsembleConfig& cfg, int threads = 1);

/// Convenience: initial states from series days (start_day-1, start_day).
EnsembleForecast run_ensemble_from_series(const Stepper& stepper, const NormStats& stats,
                                          const TimeSeries& series, int start_day,
                                          const EnsembleConfig& cfg, int threads = 1);

/// Single-variable "sst" stack holding one trajectory; lead1_epoch_day is the
/// absolute day of the first lead.
Ofs1Stack trajectory_stack(const Trajectory& traj, std::int64_t lead1_epoch_day);

/// Inverse of trajectory_stack; start_day is recovered against the epoch of
/// the truth series the forecast will be verified against.
Trajectory trajectory_from_stack(const Ofs1Stack& stack, std::int64_t truth_epoch_day);

/// Rebuilds a forecast from a stack written by save_ensemble. The noise and
/// seed fields are not stored in the file and stay at their defaults.
EnsembleForecast ensemble_from_stack(const Ofs1Stack& stack, std::int64_t truth_epoch_day);

/// One stack: variables "member000".."memberNNN" plus "mean".
void save_ensemble(const EnsembleForecast& forecast, const std::filesystem::path& path);

/// One stack per member plus one for the mean, each holding a single "sst"
/// variable: <stem>_member000<ext>, ..., <stem>_mean<ext>. Returns the paths.
std::vector<std::filesystem::path> save_ensemble_split(const EnsembleForecast& forecast,
                                                       const std::filesystem::path& path);

}  // namespace ecast
