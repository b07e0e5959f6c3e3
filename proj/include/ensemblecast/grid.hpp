#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ensemblecast/errors.hpp"

namespace ecast {

enum class Var { sst, u10, v10, bathymetry };

const char* var_name(Var v) noexcept;
const char* var_units(Var v) noexcept;  // "K", "m/s", "m"
std::optional<Var> var_from_name(std::string_view name) noexcept;

inline float missing_value() noexcept { return std::numeric_limits<float>::quiet_NaN(); }

/// Regular latitude-longitude grid with a sea mask. Axes are strictly
/// ascending; the mask is row-major [lat][lon] with 1 = sea.
struct GridSpec {
  std::vector<double> lats;
  std::vector<double> lons;
  std::vector<std::uint8_t> sea_mask;

  int n_lat() const noexcept { return static_cast<int>(lats.size()); }
  int n_lon() const noexcept { return static_cast<int>(lons.size()); }
  std::size_t n_cells() const noexcept { return lats.size() * lons.size(); }
  std::size_t cell(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * lons.size() + static_cast<std::size_t>(j);
  }
  bool is_sea(std::size_t c) const noexcept { return sea_mask[c] != 0; }
  bool is_sea(int i, int j) const noexcept { return is_sea(cell(i, j)); }
  std::size_t n_sea() const noexcept;
  std::vector<std::size_t> sea_cells() const;

  // Throws invalid_grid / non_monotone_axis / mask_mismatch on violations.
  void validate() const;

  bool same_as(const GridSpec& other) const noexcept;
};

using GridPtr = std::shared_ptr<const GridSpec>;

/// Grid over the study-area bounding box, lat 19.55..34.525, lon -20.97..-5.975,
/// with a procedural eastern coastline and an island group; deterministic in the dims.
GridSpec make_synthetic_grid(int n_lat, int n_lon);

/// All-sea grid with explicit bounds; test and oracle helper.
GridSpec make_uniform_grid(int n_lat, int n_lon, double lat0, double lat1, double lon0,
                           double lon1);

/// One scalar field on a grid. Land cells hold NaN, except bathymetry where
/// land is exactly 0.
struct Field {
  GridPtr grid;
  Var var = Var::sst;
  std::vector<float> values;
};

Field make_field(GridPtr grid, Var var);

/// Daily stack of fields, layout [time][var][cell]. epoch_day is the absolute
/// day index of t = 0; the cadence is exactly one day.
struct TimeSeries {
  GridPtr grid;
  std::vector<Var> vars;
  std::int64_t epoch_day = 0;
  std::vector<float> data;

  int n_time() const noexcept {
    const std::size_t f = frame();
    return f == 0 ? 0 : static_cast<int>(data.size() / f);
  }
  std::size_t frame() const noexcept { return vars.size() * grid->n_cells(); }
  int var_index(Var v) const noexcept;
  bool has_var(Var v) const noexcept { return var_index(v) >= 0; }

  const float* frame_at(int t, int var_idx) const noexcept {
    return data.data() + static_cast<std::size_t>(t) * frame() +
           static_cast<std::size_t>(var_idx) * grid->n_cells();
  }
  float* frame_at(int t, int var_idx) noexcept {
    return data.data() + static_cast<std::size_t>(t) * frame() +
           static_cast<std::size_t>(var_idx) * grid->n_cells();
  }
  Field field(int t, Var v) const;
};

/// Half-open day-index ranges into a series, ordered train < val < test.
struct DayRange {
  int begin = 0;
  int end = 0;
  int size() const noexcept { return end - begin; }
  bool contains(int d) const noexcept { return d >= begin && d < end; }
};

struct DatasetSplit {
  DayRange train, val, test;
  void validate(int n_time) const;
};

struct NormStats;

/// Per-variable normalization statistics over the training range and sea
/// cells only. Diff statistics (one-day increments) exist for the dynamic
/// variables; bathymetry is static and carries state statistics only.
/// Means are always readable; the std accessors raise DegenerateVariance on
/// a zero value so degenerate stats fail at the point of use.
class VarStats {
 public:
  VarStats() = default;
  VarStats(double state_mean, double state_std, double diff_mean, double diff_std,
           bool has_diff)
      : state_mean(state_mean),
        diff_mean(diff_mean),
        has_diff(has_diff),
        state_std_(state_std),
        diff_std_(diff_std) {}

  double state_mean = 0.0;
  double diff_mean = 0.0;
  bool has_diff = false;

  double state_std() const;
  double diff_std() const;
  double lambda() const;  // 1 / diff_std^2

  // Unchecked values for serialization; may be 0.
  double state_std_raw() const noexcept { return state_std_; }
  double diff_std_raw() const noexcept { return diff_std_; }

 private:
  friend NormStats compute_norm_stats(const TimeSeries& series, const DatasetSplit& split);
  double state_std_ = 0.0;
  double diff_std_ = 0.0;
};

struct NormStats {
  std::map<Var, VarStats> per_var;
  const VarStats& of(Var v) const;
  bool has(Var v) const noexcept { return per_var.count(v) != 0; }
};

NormStats compute_norm_stats(const TimeSeries& series, const DatasetSplit& split);

/// Nearest-neighbor regridding in the plain lat/lon metric. Sea target cells
/// pull from the nearest sea source cell; land targets stay missing (0 for
/// bathymetry). Ties break toward the lower cell index.
Field regrid_nearest(const Field& src, GridPtr target);

/// Collapses k-per-day values to daily means. `vals` holds n_steps frames of
/// `frame` values each; n_steps must be divisible by k.
std::vector<float> aggregate_daily(std::span<const float> vals, std::size_t frame, int k);

/// Deterministic desk-scale dataset: SST with a seasonal cycle, meridional
/// gradient, slowly advected anomalies, wind-coupled term and a small daily
/// innovation; AR(1) wind components; static bathymetry.
TimeSeries make_synthetic_dataset(GridPtr grid, int n_days, std::uint64_t seed);

// ---------------------------------------------------------------------------
// OFS1 gridded field stack, little-endian:
//   "OFS1"; u32 n_time, n_lat, n_lon, n_var; i64 epoch_day;
//   f64 lats[n_lat]; f64 lons[n_lon]; u8 sea_mask[n_lat*n_lon];
//   n_var x 32-byte NUL-padded ASCII names;
//   f32 payload [time][var][lat][lon]; land = qNaN 0x7FC00000 (bathymetry: 0).
// ---------------------------------------------------------------------------

/// Raw file model; variable names are free-form (ensemble outputs store one
/// layer per member), while TimeSeries restricts to the physical variables.
struct Ofs1Stack {
  GridPtr grid;
  std::vector<std::string> var_names;
  std::int64_t epoch_day = 0;
  std::vector<float> data;  // [time][var][cell]

  std::size_t frame() const noexcept { return var_names.size() * grid->n_cells(); }
  int n_time() const noexcept {
    const std::size_t f = frame();
    return f == 0 ? 0 : static_cast<int>(data.size() / f);
  }
  const float* frame_at(int t, int v) const noexcept {
    return data.data() + static_cast<std::size_t>(t) * frame() +
           static_cast<std::size_t>(v) * grid->n_cells();
  }
  float* frame_at(int t, int v) noexcept {
    return data.data() + static_cast<std::size_t>(t) * frame() +
           static_cast<std::size_t>(v) * grid->n_cells();
  }
  int var_index(std::string_view name) const noexcept;
};

void save_ofs1(const Ofs1Stack& stack, const std::filesystem::path& path);
Ofs1Stack load_ofs1(const std::filesystem::path& path);

void save_series(const TimeSeries& series, const std::filesystem::path& path);
TimeSeries load_series(const std::filesystem::path& path);

TimeSeries series_from_stack(const Ofs1Stack& stack);
Ofs1Stack stack_from_series(const TimeSeries& series);

}  // namespace ecast
