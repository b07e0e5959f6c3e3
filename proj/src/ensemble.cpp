#include "ensemblecast/ensemble.hpp"

#include <cstdio>
#include <thread>
#include <utility>

#include "ensemblecast/errors.hpp"
#include "ensemblecast/rng.hpp"

namespace ecast {

void EnsembleConfig::validate() const {
  if (members < 2)
    throw Error(Errc::single_member,
                "ensemble needs at least 2 members, got " + std::to_string(members));
  if (horizon < 1)
    throw Error(Errc::invalid_argument,
                "ensemble horizon must be >= 1, got " + std::to_string(horizon));
}

Trajectory ensemble_mean(const std::vector<Trajectory>& members) {
  if (members.empty())
    throw Error(Errc::invalid_argument, "ensemble_mean of zero trajectories");
  const Trajectory& head = members.front();
  const std::size_t n_cells = head.grid->n_cells();
  for (const Trajectory& m : members) {
    if (!m.grid->same_as(*head.grid))
      throw Error(Errc::grid_mismatch, "ensemble members disagree on the grid");
    if (m.horizon() != head.horizon())
      throw Error(Errc::horizon_mismatch, "ensemble members disagree on the horizon");
  }

  Trajectory mean;
  mean.grid = head.grid;
  mean.start_day = head.start_day;
  mean.states.assign(head.states.size(), std::vector<float>(n_cells));
  const double inv_m = 1.0 / static_cast<double>(members.size());
  for (std::size_t t = 0; t < head.states.size(); ++t) {
    for (std::size_t c = 0; c < n_cells; ++c) {
      double acc = 0.0;
      for (const Trajectory& m : members) acc += m.states[t][c];
      mean.states[t][c] = static_cast<float>(acc * inv_m);
    }
  }
  return mean;
}

EnsembleForecast run_ensemble(const Stepper& stepper, const NormStats& stats,
                              const Field& x_prev, const Field& x_curr,
                              const TimeSeries& forcing, int first_target,
                              const EnsembleConfig& cfg, int threads) {
  cfg.validate();
  const int n_members = cfg.members;

  EnsembleForecast out;
  out.config = cfg;
  out.start_day = first_target - 1;
  out.epoch_day = forcing.epoch_day + first_target;
  out.members.resize(n_members);

  auto run_member = [&](int m) {
    const std::uint64_t seed = mix_seed(cfg.base_seed, static_cast<std::uint64_t>(m));
    auto [p_prev, p_curr] = perturb_initial_states(x_prev, x_curr, cfg.noise, seed);
    out.members[m] =
        rollout(stepper, stats, p_prev, p_curr, forcing, first_target, cfg.horizon);
  };

  if (threads < 1) threads = 1;
  if (threads > n_members) threads = n_members;
  if (threads == 1) {
    for (int m = 0; m < n_members; ++m) run_member(m);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int k = 0; k < threads; ++k)
      pool.emplace_back([&, k] {
        for (int m = k; m < n_members; m += threads) run_member(m);
      });
    for (std::thread& t : pool) t.join();
  }

  out.mean = ensemble_mean(out.members);
  return out;
}

EnsembleForecast run_ensemble_from_series(const Stepper& stepper, const NormStats& stats,
                                          const TimeSeries& series, int start_day,
                                          const EnsembleConfig& cfg, int threads) {
  if (start_day < 1 || start_day >= series.n_time())
    throw Error(Errc::invalid_argument,
                "ensemble start day " + std::to_string(start_day) + " outside series");
  const int i_sst = series.var_index(Var::sst);
  if (i_sst < 0) throw Error(Errc::unknown_variable, "series has no sst variable");

  Field prev = make_field(series.grid, Var::sst);
  Field curr = make_field(series.grid, Var::sst);
  const std::size_t n = series.grid->n_cells();
  const float* fp = series.frame_at(start_day - 1, i_sst);
  const float* fc = series.frame_at(start_day, i_sst);
  std::copy(fp, fp + n, prev.values.begin());
  std::copy(fc, fc + n, curr.values.begin());
  return run_ensemble(stepper, stats, prev, curr, series, start_day + 1, cfg, threads);
}

namespace {

std::string member_name(int m) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "member%03d", m);
  return buf;
}

Ofs1Stack ensemble_stack(const EnsembleForecast& f) {
  if (f.members.empty())
    throw Error(Errc::invalid_argument, "ensemble forecast has no members");
  const GridPtr grid = f.mean.grid;
  const int horizon = f.mean.horizon();
  const int n_members = f.n_members();

  Ofs1Stack stack;
  stack.grid = grid;
  stack.epoch_day = f.epoch_day;
  stack.var_names.reserve(n_members + 1);
  for (int m = 0; m < n_members; ++m) stack.var_names.push_back(member_name(m));
  stack.var_names.push_back("mean");
  stack.data.resize(static_cast<std::size_t>(horizon) * stack.frame());
  for (int t = 0; t < horizon; ++t) {
    for (int m = 0; m < n_members; ++m)
      std::copy(f.members[m].states[t].begin(), f.members[m].states[t].end(),
                stack.frame_at(t, m));
    std::copy(f.mean.states[t].begin(), f.mean.states[t].end(),
              stack.frame_at(t, n_members));
  }
  return stack;
}

Trajectory stack_var_trajectory(const Ofs1Stack& stack, int v, int start_day) {
  Trajectory traj;
  traj.grid = stack.grid;
  traj.start_day = start_day;
  const std::size_t n = stack.grid->n_cells();
  traj.states.resize(static_cast<std::size_t>(stack.n_time()));
  for (int t = 0; t < stack.n_time(); ++t) {
    const float* p = stack.frame_at(t, v);
    traj.states[t].assign(p, p + n);
  }
  return traj;
}

}  // namespace

Ofs1Stack trajectory_stack(const Trajectory& traj, std::int64_t lead1_epoch_day) {
  Ofs1Stack stack;
  stack.grid = traj.grid;
  stack.epoch_day = lead1_epoch_day;
  stack.var_names = {"sst"};
  stack.data.resize(static_cast<std::size_t>(traj.horizon()) * stack.frame());
  for (int t = 0; t < traj.horizon(); ++t)
    std::copy(traj.states[t].begin(), traj.states[t].end(), stack.frame_at(t, 0));
  return stack;
}

Trajectory trajectory_from_stack(const Ofs1Stack& stack, std::int64_t truth_epoch_day) {
  if (stack.var_names.size() != 1)
    throw Error(Errc::unknown_variable,
                "expected a single-variable forecast stack, got " +
                    std::to_string(stack.var_names.size()) + " variables");
  const int start_day = static_cast<int>(stack.epoch_day - truth_epoch_day - 1);
  return stack_var_trajectory(stack, 0, start_day);
}

EnsembleForecast ensemble_from_stack(const Ofs1Stack& stack, std::int64_t truth_epoch_day) {
  const int mean_idx = stack.var_index("mean");
  if (mean_idx < 0)
    throw Error(Errc::unknown_variable, "ensemble stack has no mean layer");
  int n_members = 0;
  while (stack.var_index(member_name(n_members)) >= 0) ++n_members;
  if (n_members == 0)
    throw Error(Errc::unknown_variable, "ensemble stack has no member layers");
  if (static_cast<std::size_t>(n_members) + 1 != stack.var_names.size())
    throw Error(Errc::unknown_variable, "ensemble stack has unexpected extra layers");

  EnsembleForecast out;
  out.config.members = n_members;
  out.config.horizon = stack.n_time();
  out.start_day = static_cast<int>(stack.epoch_day - truth_epoch_day - 1);
  out.epoch_day = stack.epoch_day;
  out.members.reserve(static_cast<std::size_t>(n_members));
  for (int m = 0; m < n_members; ++m)
    out.members.push_back(
        stack_var_trajectory(stack, stack.var_index(member_name(m)), out.start_day));
  out.mean = stack_var_trajectory(stack, mean_idx, out.start_day);
  return out;
}

void save_ensemble(const EnsembleForecast& forecast, const std::filesystem::path& path) {
  save_ofs1(ensemble_stack(forecast), path);
}

std::vector<std::filesystem::path> save_ensemble_split(const EnsembleForecast& forecast,
                                                       const std::filesystem::path& path) {
  if (forecast.members.empty())
    throw Error(Errc::invalid_argument, "ensemble forecast has no members");
  const std::string ext = path.extension().string();
  std::filesystem::path stem = path;
  stem.replace_extension();

  std::vector<std::filesystem::path> written;
  written.reserve(forecast.members.size() + 1);
  for (int m = 0; m < forecast.n_members(); ++m) {
    std::filesystem::path p = stem;
    p += "_" + member_name(m) + ext;
    save_ofs1(trajectory_stack(forecast.members[m], forecast.epoch_day), p);
    written.push_back(std::move(p));
  }
  std::filesystem::path p = stem;
  p += std::string("_mean") + ext;
  save_ofs1(trajectory_stack(forecast.mean, forecast.epoch_day), p);
  written.push_back(std::move(p));
  return written;
}

}  // namespace ecast
