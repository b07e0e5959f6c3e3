#include "ensemblecast/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ecast {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::bad_magic: return "BadMagic";
    case Errc::truncated_file: return "TruncatedFile";
    case Errc::non_monotone_axis: return "NonMonotoneAxis";
    case Errc::mask_mismatch: return "MaskMismatch";
    case Errc::degenerate_variance: return "DegenerateVariance";
    case Errc::empty_overlap: return "EmptyOverlap";
    case Errc::cadence_mismatch: return "CadenceMismatch";
    case Errc::invalid_grid: return "InvalidGrid";
    case Errc::invalid_split: return "InvalidSplit";
    case Errc::unknown_variable: return "UnknownVariable";
    case Errc::negative_sigma: return "NegativeSigma";
    case Errc::resolution_mismatch: return "ResolutionMismatch";
    case Errc::bad_octaves: return "BadOctaves";
    case Errc::grid_mismatch: return "GridMismatch";
    case Errc::bad_level_spec: return "BadLevelSpec";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::insufficient_forcing: return "InsufficientForcing";
    case Errc::horizon_mismatch: return "HorizonMismatch";
    case Errc::diverged_loss: return "DivergedLoss";
    case Errc::single_member: return "SingleMember";
    case Errc::lead_out_of_range: return "LeadOutOfRange";
    case Errc::lead_mismatch: return "LeadMismatch";
    case Errc::parse_error: return "ParseError";
    case Errc::unknown_key: return "UnknownKey";
    case Errc::missing_section: return "MissingSection";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Error";
}

const char* var_name(Var v) noexcept {
  switch (v) {
    case Var::sst: return "sst";
    case Var::u10: return "u10";
    case Var::v10: return "v10";
    case Var::bathymetry: return "bathymetry";
  }
  return "?";
}

const char* var_units(Var v) noexcept {
  switch (v) {
    case Var::sst: return "K";
    case Var::u10: return "m/s";
    case Var::v10: return "m/s";
    case Var::bathymetry: return "m";
  }
  return "";
}

std::optional<Var> var_from_name(std::string_view name) noexcept {
  if (name == "sst") return Var::sst;
  if (name == "u10") return Var::u10;
  if (name == "v10") return Var::v10;
  if (name == "bathymetry") return Var::bathymetry;
  return std::nullopt;
}

std::size_t GridSpec::n_sea() const noexcept {
  return static_cast<std::size_t>(std::count(sea_mask.begin(), sea_mask.end(), 1));
}

std::vector<std::size_t> GridSpec::sea_cells() const {
  std::vector<std::size_t> out;
  out.reserve(n_sea());
  for (std::size_t c = 0; c < sea_mask.size(); ++c)
    if (sea_mask[c]) out.push_back(c);
  return out;
}

void GridSpec::validate() const {
  if (lats.empty() || lons.empty()) fail(Errc::invalid_grid, "empty axis");
  for (std::size_t i = 1; i < lats.size(); ++i)
    if (!(lats[i] > lats[i - 1])) fail(Errc::non_monotone_axis, "lats must be strictly ascending");
  for (std::size_t j = 1; j < lons.size(); ++j)
    if (!(lons[j] > lons[j - 1])) fail(Errc::non_monotone_axis, "lons must be strictly ascending");
  if (sea_mask.size() != n_cells()) fail(Errc::mask_mismatch, "sea mask size != n_lat*n_lon");
  for (std::uint8_t m : sea_mask)
    if (m > 1) fail(Errc::mask_mismatch, "sea mask entries must be 0 or 1");
}

bool GridSpec::same_as(const GridSpec& other) const noexcept {
  return lats == other.lats && lons == other.lons && sea_mask == other.sea_mask;
}

GridSpec make_uniform_grid(int n_lat, int n_lon, double lat0, double lat1, double lon0,
                           double lon1) {
  if (n_lat < 1 || n_lon < 1) fail(Errc::invalid_grid, "grid dims must be positive");
  GridSpec g;
  g.lats.resize(n_lat);
  g.lons.resize(n_lon);
  for (int i = 0; i < n_lat; ++i)
    g.lats[i] = n_lat == 1 ? lat0 : lat0 + (lat1 - lat0) * i / (n_lat - 1);
  for (int j = 0; j < n_lon; ++j)
    g.lons[j] = n_lon == 1 ? lon0 : lon0 + (lon1 - lon0) * j / (n_lon - 1);
  g.sea_mask.assign(g.n_cells(), 1);
  return g;
}

Field make_field(GridPtr grid, Var var) {
  Field f;
  f.grid = std::move(grid);
  f.var = var;
  const float land = var == Var::bathymetry ? 0.0f : missing_value();
  f.values.assign(f.grid->n_cells(), 0.0f);
  for (std::size_t c = 0; c < f.values.size(); ++c)
    if (!f.grid->is_sea(c)) f.values[c] = land;
  return f;
}

int TimeSeries::var_index(Var v) const noexcept {
  for (std::size_t k = 0; k < vars.size(); ++k)
    if (vars[k] == v) return static_cast<int>(k);
  return -1;
}

Field TimeSeries::field(int t, Var v) const {
  const int k = var_index(v);
  if (k < 0) fail(Errc::unknown_variable, std::string("series lacks variable ") + var_name(v));
  Field f;
  f.grid = grid;
  f.var = v;
  const float* p = frame_at(t, k);
  f.values.assign(p, p + grid->n_cells());
  return f;
}

void DatasetSplit::validate(int n_time) const {
  auto ok = [n_time](const DayRange& r) { return r.begin >= 0 && r.begin < r.end && r.end <= n_time; };
  if (!ok(train) || !ok(val) || !ok(test))
    fail(Errc::invalid_split, "split ranges must be non-empty and inside the series");
  if (!(train.end <= val.begin && val.end <= test.begin))
    fail(Errc::invalid_split, "split ranges must be ordered train < val < test");
}

const VarStats& NormStats::of(Var v) const {
  auto it = per_var.find(v);
  if (it == per_var.end())
    fail(Errc::unknown_variable, std::string("no stats for variable ") + var_name(v));
  return it->second;
}

double VarStats::state_std() const {
  if (!(state_std_ > 0.0)) fail(Errc::degenerate_variance, "state std is zero");
  return state_std_;
}

double VarStats::diff_std() const {
  if (!has_diff) fail(Errc::unknown_variable, "variable has no diff statistics");
  if (!(diff_std_ > 0.0)) fail(Errc::degenerate_variance, "diff std is zero");
  return diff_std_;
}

double VarStats::lambda() const {
  const double d = diff_std();
  return 1.0 / (d * d);
}

NormStats compute_norm_stats(const TimeSeries& series, const DatasetSplit& split) {
  split.validate(series.n_time());
  const GridSpec& g = *series.grid;
  const auto sea = g.sea_cells();
  if (sea.empty()) fail(Errc::mask_mismatch, "grid has no sea cells");

  NormStats out;
  for (std::size_t k = 0; k < series.vars.size(); ++k) {
    const Var v = series.vars[k];
    VarStats st;

    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (int t = split.train.begin; t < split.train.end; ++t) {
      const float* p = series.frame_at(t, static_cast<int>(k));
      for (std::size_t c : sea) {
        const double x = p[c];
        sum += x;
        sum2 += x * x;
        ++n;
      }
    }
    st.state_mean = sum / static_cast<double>(n);
    const double var_state =
        std::max(0.0, sum2 / static_cast<double>(n) - st.state_mean * st.state_mean);
    st.state_std_ = std::sqrt(var_state);

    st.has_diff = v != Var::bathymetry;
    if (st.has_diff) {
      if (split.train.size() < 2)
        fail(Errc::invalid_split, "diff statistics need at least two training days");
      double dsum = 0.0, dsum2 = 0.0;
      std::size_t dn = 0;
      for (int t = split.train.begin + 1; t < split.train.end; ++t) {
        const float* p1 = series.frame_at(t, static_cast<int>(k));
        const float* p0 = series.frame_at(t - 1, static_cast<int>(k));
        for (std::size_t c : sea) {
          const double d = static_cast<double>(p1[c]) - static_cast<double>(p0[c]);
          dsum += d;
          dsum2 += d * d;
          ++dn;
        }
      }
      st.diff_mean = dsum / static_cast<double>(dn);
      const double var_diff =
          std::max(0.0, dsum2 / static_cast<double>(dn) - st.diff_mean * st.diff_mean);
      st.diff_std_ = std::sqrt(var_diff);
    }
    out.per_var[v] = st;
  }
  return out;
}

Field regrid_nearest(const Field& src, GridPtr target) {
  const GridSpec& s = *src.grid;
  const GridSpec& t = *target;
  const double s_lat0 = s.lats.front(), s_lat1 = s.lats.back();
  const double s_lon0 = s.lons.front(), s_lon1 = s.lons.back();
  const double t_lat0 = t.lats.front(), t_lat1 = t.lats.back();
  const double t_lon0 = t.lons.front(), t_lon1 = t.lons.back();
  if (s_lat1 < t_lat0 || t_lat1 < s_lat0 || s_lon1 < t_lon0 || t_lon1 < s_lon0)
    fail(Errc::empty_overlap, "source and target bounding boxes do not overlap");

  const auto src_sea = s.sea_cells();
  if (src_sea.empty()) fail(Errc::empty_overlap, "source grid has no sea cells");

  Field out = make_field(target, src.var);
  for (int i = 0; i < t.n_lat(); ++i) {
    for (int j = 0; j < t.n_lon(); ++j) {
      const std::size_t c = t.cell(i, j);
      if (!t.is_sea(c)) continue;
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = src_sea.front();
      for (std::size_t sc : src_sea) {
        const std::size_t si = sc / s.lons.size();
        const std::size_t sj = sc % s.lons.size();
        const double dlat = s.lats[si] - t.lats[i];
        const double dlon = s.lons[sj] - t.lons[j];
        const double d2 = dlat * dlat + dlon * dlon;
        if (d2 < best) {
          best = d2;
          best_c = sc;
        }
      }
      out.values[c] = src.values[best_c];
    }
  }
  return out;
}

std::vector<float> aggregate_daily(std::span<const float> vals, std::size_t frame, int k) {
  if (k < 1) fail(Errc::cadence_mismatch, "aggregation factor must be >= 1");
  if (frame == 0 || vals.size() % frame != 0)
    fail(Errc::cadence_mismatch, "value count is not a whole number of frames");
  const std::size_t n_steps = vals.size() / frame;
  if (n_steps % static_cast<std::size_t>(k) != 0)
    fail(Errc::cadence_mismatch, "step count is not divisible by the aggregation factor");
  const std::size_t n_days = n_steps / static_cast<std::size_t>(k);
  std::vector<float> out(n_days * frame);
  for (std::size_t d = 0; d < n_days; ++d) {
    for (std::size_t c = 0; c < frame; ++c) {
      double acc = 0.0;
      for (int s = 0; s < k; ++s) acc += vals[(d * k + s) * frame + c];
      out[d * frame + c] = static_cast<float>(acc / k);
    }
  }
  return out;
}

}  // namespace ecast
