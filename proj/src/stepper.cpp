#include "ensemblecast/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "ensemblecast/errors.hpp"

namespace ecast {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double cell_weight(const GridSpec& grid, std::size_t c) {
  const int i = static_cast<int>(c) / grid.n_lon();
  return std::cos(grid.lats[static_cast<std::size_t>(i)] * kDegToRad);
}

}  // namespace

std::vector<double> build_input_channels(const StepInputD& in) {
  const GridSpec& g = *in.grid;
  const NormStats& st = *in.stats;
  const std::size_t n = g.n_cells();
  std::vector<double> ch(static_cast<std::size_t>(kInputChannels) * n, 0.0);

  const VarStats& s_sst = st.of(Var::sst);
  const VarStats& s_u = st.of(Var::u10);
  const VarStats& s_v = st.of(Var::v10);
  const VarStats& s_b = st.of(Var::bathymetry);
  const double inv_sst = 1.0 / s_sst.state_std();
  const double inv_u = 1.0 / s_u.state_std();
  const double inv_v = 1.0 / s_v.state_std();
  const double inv_b = 1.0 / s_b.state_std();

  const double day_angle =
      2.0 * std::numbers::pi * static_cast<double>(in.target_day) / kDaysPerYear;
  const double sin_day = std::sin(day_angle);
  const double cos_day = std::cos(day_angle);

  for (int i = 0; i < g.n_lat(); ++i) {
    const double lat_r = g.lats[static_cast<std::size_t>(i)] * kDegToRad;
    const double sin_lat = std::sin(lat_r);
    const double cos_lat = std::cos(lat_r);
    for (int j = 0; j < g.n_lon(); ++j) {
      const std::size_t c = g.cell(i, j);
      const double lon_r = g.lons[static_cast<std::size_t>(j)] * kDegToRad;
      if (g.is_sea(c)) {
        ch[0 * n + c] = (in.prev2[c] - s_sst.state_mean) * inv_sst;
        ch[1 * n + c] = (in.prev1[c] - s_sst.state_mean) * inv_sst;
        ch[2 * n + c] = (in.u10[c] - s_u.state_mean) * inv_u;
        ch[3 * n + c] = (in.v10[c] - s_v.state_mean) * inv_v;
        ch[4 * n + c] = (in.bathy[c] - s_b.state_mean) * inv_b;
      }
      ch[5 * n + c] = sin_lat;
      ch[6 * n + c] = cos_lat;
      ch[7 * n + c] = std::sin(lon_r);
      ch[8 * n + c] = std::cos(lon_r);
      ch[9 * n + c] = sin_day;
      ch[10 * n + c] = cos_day;
    }
  }
  return ch;
}

std::vector<float> Stepper::step(const StepInput& in) const {
  if (!in.grid) fail(Errc::invalid_argument, "step: null grid");
  const GridSpec& g = *in.grid;
  const std::size_t n = g.n_cells();
  std::vector<double> prev2(n), prev1(n);
  for (std::size_t c = 0; c < n; ++c) {
    prev2[c] = in.prev2[c];
    prev1[c] = in.prev1[c];
  }
  const StepInputD din{in.grid, in.stats,  prev2.data(), prev1.data(),
                       in.u10,  in.v10,    in.bathy,     in.target_day};
  const std::vector<double> inc = increment(din);
  std::vector<float> out(n);
  for (std::size_t c = 0; c < n; ++c)
    out[c] = g.is_sea(c) ? static_cast<float>(prev1[c] + inc[c]) : in.prev1[c];
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

class PersistenceStepper final : public Stepper {
 public:
  const char* kind() const noexcept override { return "persistence"; }

  std::vector<double> increment(const StepInputD& in) const override {
    return std::vector<double>(in.grid->n_cells(), 0.0);
  }

  void backward(const StepInputD& in, const std::vector<double>& d_out,
                std::vector<double>&, std::vector<double>* d_prev1,
                std::vector<double>*) const override {
    if (!d_prev1) return;
    const GridSpec& g = *in.grid;
    for (std::size_t c = 0; c < g.n_cells(); ++c)
      if (g.is_sea(c)) (*d_prev1)[c] += d_out[c];
  }

  std::size_t n_params() const noexcept override { return 0; }
  double* param_data() noexcept override { return nullptr; }
  const double* param_data() const noexcept override { return nullptr; }

  TensorStore to_tensors() const override {
    TensorStore ts;
    ts.add("meta.kind", {1}).v[0] = 0.0;
    return ts;
  }

  std::unique_ptr<Stepper> clone() const override {
    return std::make_unique<PersistenceStepper>(*this);
  }
};

// ---------------------------------------------------------------------------
// Linear 3x3 stencil over the input channels
// ---------------------------------------------------------------------------

class LinearStencilStepper final : public Stepper {
 public:
  static constexpr int kWeights = kInputChannels * 9;

  LinearStencilStepper() : params_(kWeights + 1, 0.0) {}

  const char* kind() const noexcept override { return "linear_stencil"; }

  std::vector<double> increment(const StepInputD& in) const override {
    const GridSpec& g = *in.grid;
    const std::size_t n = g.n_cells();
    const std::vector<double> ch = build_input_channels(in);
    const VarStats& s = in.stats->of(Var::sst);
    const double diff_std = s.diff_std();
    const double diff_mean = s.diff_mean;

    std::vector<double> inc(n, 0.0);
    for (int i = 0; i < g.n_lat(); ++i) {
      for (int j = 0; j < g.n_lon(); ++j) {
        const std::size_t c = g.cell(i, j);
        if (!g.is_sea(c)) continue;
        double y = params_[kWeights];
        for (int k = 0; k < kInputChannels; ++k) {
          const double* chan = ch.data() + static_cast<std::size_t>(k) * n;
          const double* w = params_.data() + static_cast<std::size_t>(k) * 9;
          for (int d = 0; d < 9; ++d)
            y += w[d] * chan[neighbor(g, i, j, d)];
        }
        inc[c] = y * diff_std + diff_mean;
      }
    }
    return inc;
  }

  void backward(const StepInputD& in, const std::vector<double>& d_out,
                std::vector<double>& d_params, std::vector<double>* d_prev1,
                std::vector<double>* d_prev2) const override {
    const GridSpec& g = *in.grid;
    const std::size_t n = g.n_cells();
    const std::vector<double> ch = build_input_channels(in);
    const VarStats& s = in.stats->of(Var::sst);
    const double diff_std = s.diff_std();
    const double inv_state = 1.0 / s.state_std();

    for (int i = 0; i < g.n_lat(); ++i) {
      for (int j = 0; j < g.n_lon(); ++j) {
        const std::size_t c = g.cell(i, j);
        if (!g.is_sea(c)) continue;
        const double d_y = d_out[c] * diff_std;
        d_params[kWeights] += d_y;
        for (int k = 0; k < kInputChannels; ++k) {
          const double* chan = ch.data() + static_cast<std::size_t>(k) * n;
          const double* w = params_.data() + static_cast<std::size_t>(k) * 9;
          double* d_w = d_params.data() + static_cast<std::size_t>(k) * 9;
          for (int d = 0; d < 9; ++d) {
            const std::size_t src = neighbor(g, i, j, d);
            d_w[d] += d_y * chan[src];
            if (k == 0 && d_prev2) (*d_prev2)[src] += d_y * w[d] * inv_state;
            if (k == 1 && d_prev1) (*d_prev1)[src] += d_y * w[d] * inv_state;
          }
        }
        if (d_prev1) (*d_prev1)[c] += d_out[c];
      }
    }
  }

  std::size_t n_params() const noexcept override { return params_.size(); }
  double* param_data() noexcept override { return params_.data(); }
  const double* param_data() const noexcept override { return params_.data(); }

  TensorStore to_tensors() const override {
    TensorStore ts;
    ts.add("meta.kind", {1}).v[0] = 1.0;
    Tensor& w = ts.add("stencil.w", {kInputChannels, 3, 3});
    std::copy_n(params_.begin(), kWeights, w.v.begin());
    ts.add("stencil.b", {1}).v[0] = params_[kWeights];
    return ts;
  }

  std::unique_ptr<Stepper> clone() const override {
    return std::make_unique<LinearStencilStepper>(*this);
  }

 private:
  // Offset d = di*3+dj over the 3x3 window; out-of-bounds or land neighbors
  // fall back to the center cell.
  static std::size_t neighbor(const GridSpec& g, int i, int j, int d) {
    const int ni = i + d / 3 - 1;
    const int nj = j + d % 3 - 1;
    if (ni < 0 || ni >= g.n_lat() || nj < 0 || nj >= g.n_lon() || !g.is_sea(ni, nj))
      return g.cell(i, j);
    return g.cell(ni, nj);
  }

  std::vector<double> params_;
};

}  // namespace

std::unique_ptr<Stepper> make_persistence() { return std::make_unique<PersistenceStepper>(); }

std::unique_ptr<Stepper> make_linear_stencil() {
  return std::make_unique<LinearStencilStepper>();
}

// ---------------------------------------------------------------------------
// Rollout
// ---------------------------------------------------------------------------

namespace {

struct ForcingIdx {
  int u10, v10, bathy;
};

ForcingIdx forcing_indices(const TimeSeries& forcing) {
  const ForcingIdx idx{forcing.var_index(Var::u10), forcing.var_index(Var::v10),
                       forcing.var_index(Var::bathymetry)};
  if (idx.u10 < 0 || idx.v10 < 0 || idx.bathy < 0)
    fail(Errc::insufficient_forcing, "forcing series lacks u10/v10/bathymetry");
  return idx;
}

}  // namespace

Trajectory rollout(const Stepper& stepper, const NormStats& stats, const Field& x_prev,
                   const Field& x_curr, const TimeSeries& forcing, int first_target,
                   int horizon) {
  if (horizon < 1) fail(Errc::invalid_argument, "rollout: horizon must be >= 1");
  if (!x_prev.grid || !x_curr.grid || !forcing.grid)
    fail(Errc::invalid_argument, "rollout: null grid");
  if (!x_prev.grid->same_as(*forcing.grid) || !x_curr.grid->same_as(*forcing.grid))
    fail(Errc::grid_mismatch, "rollout: initial states and forcing on different grids");
  if (x_prev.var != Var::sst || x_curr.var != Var::sst)
    fail(Errc::invalid_argument, "rollout: initial states must be sst fields");
  if (first_target < 0 || first_target + horizon > forcing.n_time())
    fail(Errc::insufficient_forcing,
         "rollout: forcing covers " + std::to_string(forcing.n_time()) +
             " days, need target days " + std::to_string(first_target) + ".." +
             std::to_string(first_target + horizon - 1));
  const ForcingIdx idx = forcing_indices(forcing);

  Trajectory traj;
  traj.grid = x_curr.grid;
  traj.start_day = first_target - 1;
  traj.states.reserve(static_cast<std::size_t>(horizon));

  std::vector<float> prev2 = x_prev.values;
  std::vector<float> prev1 = x_curr.values;
  for (int t = 0; t < horizon; ++t) {
    const int day = first_target + t;
    StepInput in;
    in.grid = x_curr.grid;
    in.stats = &stats;
    in.prev2 = prev2.data();
    in.prev1 = prev1.data();
    in.u10 = forcing.frame_at(day, idx.u10);
    in.v10 = forcing.frame_at(day, idx.v10);
    in.bathy = forcing.frame_at(day, idx.bathy);
    in.target_day = forcing.epoch_day + day;
    traj.states.push_back(stepper.step(in));
    prev2.swap(prev1);
    prev1 = traj.states.back();
  }
  return traj;
}

Trajectory rollout_from_series(const Stepper& stepper, const NormStats& stats,
                               const TimeSeries& series, int start_day, int horizon) {
  if (start_day < 1)
    fail(Errc::invalid_argument, "rollout_from_series: start_day must be >= 1");
  if (start_day >= series.n_time())
    fail(Errc::invalid_argument, "rollout_from_series: start_day beyond series");
  const Field x_prev = series.field(start_day - 1, Var::sst);
  const Field x_curr = series.field(start_day, Var::sst);
  return rollout(stepper, stats, x_prev, x_curr, series, start_day + 1, horizon);
}

Trajectory observed_trajectory(const TimeSeries& series, int start_day, int horizon) {
  if (horizon < 1 || start_day < 0 || start_day + horizon >= series.n_time())
    fail(Errc::invalid_argument, "observed_trajectory: window outside series");
  const int idx = series.var_index(Var::sst);
  if (idx < 0) fail(Errc::unknown_variable, "observed_trajectory: series lacks sst");
  Trajectory traj;
  traj.grid = series.grid;
  traj.start_day = start_day;
  traj.states.reserve(static_cast<std::size_t>(horizon));
  const std::size_t n = series.grid->n_cells();
  for (int t = 1; t <= horizon; ++t) {
    const float* f = series.frame_at(start_day + t, idx);
    traj.states.emplace_back(f, f + n);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

double loss_weighted_mse(const Trajectory& preds, const Trajectory& targets,
                         const GridSpec& grid, const NormStats& stats) {
  if (preds.horizon() != targets.horizon())
    fail(Errc::horizon_mismatch,
         "loss: horizons " + std::to_string(preds.horizon()) + " vs " +
             std::to_string(targets.horizon()));
  if (preds.horizon() < 1) fail(Errc::horizon_mismatch, "loss: empty trajectories");
  if (!preds.grid->same_as(grid) || !targets.grid->same_as(grid))
    fail(Errc::grid_mismatch, "loss: trajectories on a different grid");

  const double lambda = stats.of(Var::sst).lambda();
  const std::vector<std::size_t> sea = grid.sea_cells();
  const double inv_sea = 1.0 / static_cast<double>(sea.size());

  double total = 0.0;
  for (int t = 0; t < preds.horizon(); ++t) {
    const std::vector<float>& p = preds.states[static_cast<std::size_t>(t)];
    const std::vector<float>& x = targets.states[static_cast<std::size_t>(t)];
    double acc = 0.0;
    for (const std::size_t c : sea) {
      const double e = static_cast<double>(p[c]) - static_cast<double>(x[c]);
      acc += cell_weight(grid, c) * lambda * e * e;
    }
    total += acc * inv_sea;
  }
  return total / preds.horizon();
}

// ---------------------------------------------------------------------------
// One-sample loss with backward-through-time gradient (double state chain)
// ---------------------------------------------------------------------------

namespace detail {

double sample_loss_grad(const Stepper& stepper, const TimeSeries& series,
                        const NormStats& stats, int t0, int horizon,
                        std::vector<double>* d_params) {
  if (horizon < 1) fail(Errc::invalid_argument, "sample: horizon must be >= 1");
  if (t0 < 1 || t0 + horizon >= series.n_time())
    fail(Errc::invalid_argument, "sample: window outside series");
  const GridSpec& g = *series.grid;
  const std::size_t n = g.n_cells();
  const int i_sst = series.var_index(Var::sst);
  if (i_sst < 0) fail(Errc::unknown_variable, "sample: series lacks sst");
  const ForcingIdx idx = forcing_indices(series);
  const double lambda = stats.of(Var::sst).lambda();
  const std::vector<std::size_t> sea = g.sea_cells();
  const double inv_sea = 1.0 / static_cast<double>(sea.size());

  // s[0] = X^{t0-1}, s[1] = X^{t0}, s[2..horizon+1] = predictions.
  std::vector<std::vector<double>> s;
  s.reserve(static_cast<std::size_t>(horizon) + 2);
  for (int t : {t0 - 1, t0}) {
    const float* f = series.frame_at(t, i_sst);
    s.emplace_back(f, f + n);
  }

  const auto input_at = [&](int t) {
    const int day = t0 + 1 + t;
    StepInputD in;
    in.grid = series.grid;
    in.stats = &stats;
    in.prev2 = s[static_cast<std::size_t>(t)].data();
    in.prev1 = s[static_cast<std::size_t>(t) + 1].data();
    in.u10 = series.frame_at(day, idx.u10);
    in.v10 = series.frame_at(day, idx.v10);
    in.bathy = series.frame_at(day, idx.bathy);
    in.target_day = series.epoch_day + day;
    return in;
  };

  for (int t = 0; t < horizon; ++t) {
    const std::vector<double> inc = stepper.increment(input_at(t));
    std::vector<double> pred = s[static_cast<std::size_t>(t) + 1];
    for (const std::size_t c : sea) pred[c] += inc[c];
    s.push_back(std::move(pred));
  }

  double loss = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const float* target = series.frame_at(t0 + 1 + t, i_sst);
    const std::vector<double>& pred = s[static_cast<std::size_t>(t) + 2];
    double acc = 0.0;
    for (const std::size_t c : sea) {
      const double e = pred[c] - static_cast<double>(target[c]);
      acc += cell_weight(g, c) * lambda * e * e;
    }
    loss += acc * inv_sea;
  }
  loss /= horizon;
  if (!d_params) return loss;

  std::vector<std::vector<double>> ds(static_cast<std::size_t>(horizon) + 2,
                                      std::vector<double>(n, 0.0));
  const double scale = 2.0 * inv_sea / horizon;
  for (int t = 0; t < horizon; ++t) {
    const float* target = series.frame_at(t0 + 1 + t, i_sst);
    const std::vector<double>& pred = s[static_cast<std::size_t>(t) + 2];
    std::vector<double>& d = ds[static_cast<std::size_t>(t) + 2];
    for (const std::size_t c : sea)
      d[c] = scale * cell_weight(g, c) * lambda * (pred[c] - static_cast<double>(target[c]));
  }

  for (int t = horizon - 1; t >= 0; --t) {
    stepper.backward(input_at(t), ds[static_cast<std::size_t>(t) + 2], *d_params,
                     &ds[static_cast<std::size_t>(t) + 1], &ds[static_cast<std::size_t>(t)]);
  }
  return loss;
}

}  // namespace detail

double gradient_check(Stepper& stepper, const TimeSeries& series, const NormStats& stats,
                      int t0, int horizon, double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3))
    fail(Errc::invalid_argument, "gradient_check: epsilon must be in [1e-6, 1e-3]");
  const std::size_t np = stepper.n_params();
  std::vector<double> grad(np, 0.0);
  detail::sample_loss_grad(stepper, series, stats, t0, horizon, &grad);
  if (np == 0) return 0.0;

  double* p = stepper.param_data();
  std::vector<double> num(np, 0.0);
  double scale = 0.0;
  for (std::size_t k = 0; k < np; ++k) {
    const double orig = p[k];
    p[k] = orig + epsilon;
    const double lp = detail::sample_loss_grad(stepper, series, stats, t0, horizon, nullptr);
    p[k] = orig - epsilon;
    const double lm = detail::sample_loss_grad(stepper, series, stats, t0, horizon, nullptr);
    p[k] = orig;
    num[k] = (lp - lm) / (2.0 * epsilon);
    scale = std::max({scale, std::abs(grad[k]), std::abs(num[k])});
  }
  // Components tiny relative to the gradient's overall scale are compared
  // against that scale; finite differences cannot resolve them relatively.
  const double floor = std::max(1e-3 * scale, 1e-12);
  double max_rel = 0.0;
  for (std::size_t k = 0; k < np; ++k) {
    const double denom = std::max({std::abs(grad[k]), std::abs(num[k]), floor});
    max_rel = std::max(max_rel, std::abs(grad[k] - num[k]) / denom);
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

namespace {

constexpr Var kAllVars[] = {Var::sst, Var::u10, Var::v10, Var::bathymetry};

}  // namespace

void save_model(const Stepper& stepper, const NormStats& stats,
                const std::filesystem::path& path) {
  TensorStore ts = stepper.to_tensors();
  for (const Var v : kAllVars) {
    if (!stats.has(v)) continue;
    const VarStats& s = stats.of(v);
    Tensor& t = ts.add(std::string("stats.") + var_name(v), {5});
    t.v = {s.state_mean, s.state_std_raw(), s.diff_mean, s.diff_std_raw(),
           s.has_diff ? 1.0 : 0.0};
  }
  save_omp1(ts, path);
}

LoadedModel load_model(const std::filesystem::path& path, GridPtr grid) {
  const TensorStore ts = load_omp1(path);

  LoadedModel m;
  for (const Var v : kAllVars) {
    const Tensor* t = ts.find(std::string("stats.") + var_name(v));
    if (!t) continue;
    if (t->v.size() != 5)
      fail(Errc::shape_mismatch, std::string("model: bad stats tensor for ") + var_name(v));
    m.stats.per_var.emplace(
        v, VarStats(t->v[0], t->v[1], t->v[2], t->v[3], t->v[4] != 0.0));
  }

  const Tensor* kind = ts.find("meta.kind");
  if (!kind || kind->v.size() != 1)
    fail(Errc::invalid_argument, "model: missing meta.kind tensor");
  const int k = static_cast<int>(kind->v[0]);
  switch (k) {
    case 0:
      m.stepper = make_persistence();
      break;
    case 1: {
      m.stepper = make_linear_stencil();
      const Tensor& w = ts.at("stencil.w");
      const Tensor& b = ts.at("stencil.b");
      if (w.v.size() != static_cast<std::size_t>(kInputChannels) * 9 || b.v.size() != 1)
        fail(Errc::shape_mismatch, "model: bad stencil tensor shapes");
      double* p = m.stepper->param_data();
      std::copy(w.v.begin(), w.v.end(), p);
      p[w.v.size()] = b.v[0];
      break;
    }
    case 2:
      m.stepper = detail::graph_from_tensors(ts, std::move(grid));
      break;
    default:
      fail(Errc::invalid_argument, "model: unknown stepper kind " + std::to_string(k));
  }
  return m;
}

}  // namespace ecast
