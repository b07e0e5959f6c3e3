#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ensemblecast/grid.hpp"
#include "ensemblecast/mesh.hpp"
#include "ensemblecast/tensor.hpp"

namespace ecast {

/// One autoregressive step worth of inputs: the two previous SST states, the
/// target day's wind forcing, static bathymetry, and the absolute target day
/// for the seasonal harmonics. Pointers reference full-grid [lat][lon]
/// arrays owned by the caller; values are physical units, land cells NaN.
struct StepInput {
  GridPtr grid;
  const NormStats* stats = nullptr;
  const float* prev2 = nullptr;
  const float* prev1 = nullptr;
  const float* u10 = nullptr;
  const float* v10 = nullptr;
  const float* bathy = nullptr;
  std::int64_t target_day = 0;
};

/// Double-precision variant of the state fields; training and the
/// finite-difference checks keep the autoregressive state chain in double so
/// loss differences stay smooth in the parameters.
struct StepInputD {
  GridPtr grid;
  const NormStats* stats = nullptr;
  const double* prev2 = nullptr;
  const double* prev1 = nullptr;
  const float* u10 = nullptr;
  const float* v10 = nullptr;
  const float* bathy = nullptr;
  std::int64_t target_day = 0;
};

inline constexpr int kInputChannels = 11;
inline constexpr double kDaysPerYear = 365.25;

/// Normalized input channels, row-major [channel][cell]: SST at t-2 and t-1,
/// u10, v10 (state-normalized), bathymetry, sin/cos latitude, sin/cos
/// longitude, sin/cos day-of-year. Dynamic channels hold 0 on land.
std::vector<double> build_input_channels(const StepInputD& in);

struct Trajectory {
  GridPtr grid;
  int start_day = 0;                        // day index of X^0
  std::vector<std::vector<float>> states;   // X-hat^1..X-hat^T, physical units

  int horizon() const noexcept { return static_cast<int>(states.size()); }
};

class Stepper {
 public:
  virtual ~Stepper() = default;
  virtual const char* kind() const noexcept = 0;

  /// Physical-unit increment per cell (0 on land). Trainable steppers emit
  /// predicted_normalized_increment * diff_std + diff_mean; persistence emits 0.
  virtual std::vector<double> increment(const StepInputD& in) const = 0;

  /// Reverse-mode pass for d_out = dL/d(output state). Accumulates into
  /// d_params (length n_params) and optionally into the input-state gradients
  /// used by multi-step training.
  virtual void backward(const StepInputD& in, const std::vector<double>& d_out,
                        std::vector<double>& d_params, std::vector<double>* d_prev1,
                        std::vector<double>* d_prev2) const = 0;

  virtual std::size_t n_params() const noexcept = 0;
  virtual double* param_data() noexcept = 0;
  virtual const double* param_data() const noexcept = 0;

  /// Named parameter tensors plus "meta.*" architecture tensors.
  virtual TensorStore to_tensors() const = 0;
  virtual std::unique_ptr<Stepper> clone() const = 0;

  /// Residual update X-hat^t = X^{t-1} + increment, rounded to f32; land
  /// cells copy X^{t-1}.
  std::vector<float> step(const StepInput& in) const;
};

std::unique_ptr<Stepper> make_persistence();
std::unique_ptr<Stepper> make_linear_stencil();
std::unique_ptr<Stepper> make_graph_stepper(GridPtr grid, std::shared_ptr<const HierMesh> mesh,
                                            int width, int proc_layers, std::uint64_t seed);

/// X-hat^t = step(X-hat^{t-2}, X-hat^{t-1}, F^t) for t = 1..horizon, forcing
/// taken from `forcing` at day indices first_target..first_target+horizon-1.
Trajectory rollout(const Stepper& stepper, const NormStats& stats, const Field& x_prev,
                   const Field& x_curr, const TimeSeries& forcing, int first_target,
                   int horizon);

/// Convenience: initial states from series days (start_day-1, start_day).
Trajectory rollout_from_series(const Stepper& stepper, const NormStats& stats,
                               const TimeSeries& series, int start_day, int horizon);

/// Observed trajectory over series days start_day+1..start_day+horizon.
Trajectory observed_trajectory(const TimeSeries& series, int start_day, int horizon);

/// L = (1/T) sum_t (1/|sea|) sum_v cos(lat_v) * lambda * (pred - target)^2.
double loss_weighted_mse(const Trajectory& preds, const Trajectory& targets,
                         const GridSpec& grid, const NormStats& stats);

/// Max relative deviation between analytic parameter gradients and central
/// finite differences of the one-sample loss (X^0 at day t0, `horizon` steps).
/// Components tiny against the gradient's overall scale are measured against
/// that scale instead, since finite differences cannot resolve them.
double gradient_check(Stepper& stepper, const TimeSeries& series, const NormStats& stats,
                      int t0, int horizon, double epsilon);

void save_model(const Stepper& stepper, const NormStats& stats,
                const std::filesystem::path& path);

struct LoadedModel {
  std::unique_ptr<Stepper> stepper;
  NormStats stats;
};

/// The grid is needed to rebuild the mesh for graph models.
LoadedModel load_model(const std::filesystem::path& path, GridPtr grid);

namespace detail {

/// Loss of the sample starting at X^0 = series day t0 over `horizon` steps,
/// keeping the state chain in double. When d_params is non-null the full
/// backward-through-time gradient is accumulated into it.
double sample_loss_grad(const Stepper& stepper, const TimeSeries& series,
                        const NormStats& stats, int t0, int horizon,
                        std::vector<double>* d_params);

/// Rebuild a graph stepper from its saved tensors (meta + weights).
std::unique_ptr<Stepper> graph_from_tensors(const TensorStore& ts, GridPtr grid);

}  // namespace detail

}  // namespace ecast
