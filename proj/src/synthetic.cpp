#include <cmath>
#include <numbers>

#include "ensemblecast/grid.hpp"
#include "ensemblecast/rng.hpp"

namespace ecast {
namespace {

constexpr double kLat0 = 19.55, kLat1 = 34.525;
constexpr double kLon0 = -20.97, kLon1 = -5.975;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Fraction of the longitude span west of the coastline at relative latitude fi.
double coast_fraction(double fi) {
  return 0.84 + 0.06 * std::sin(5.0 * fi + 1.7) + 0.05 * fi;
}

struct Island {
  double fi, fj, r;
};
constexpr Island kIslands[] = {
    {0.28, 0.52, 0.045}, {0.33, 0.60, 0.035}, {0.62, 0.30, 0.050}};

double frac(int idx, int n) { return n == 1 ? 0.0 : static_cast<double>(idx) / (n - 1); }

}  // namespace

GridSpec make_synthetic_grid(int n_lat, int n_lon) {
  GridSpec g = make_uniform_grid(n_lat, n_lon, kLat0, kLat1, kLon0, kLon1);
  for (int i = 0; i < n_lat; ++i) {
    const double fi = frac(i, n_lat);
    for (int j = 0; j < n_lon; ++j) {
      const double fj = frac(j, n_lon);
      bool land = fj > coast_fraction(fi);
      for (const Island& isl : kIslands) {
        const double di = fi - isl.fi, dj = fj - isl.fj;
        if (di * di + dj * dj < isl.r * isl.r) land = true;
      }
      if (land) g.sea_mask[g.cell(i, j)] = 0;
    }
  }
  return g;
}

TimeSeries make_synthetic_dataset(GridPtr grid, int n_days, std::uint64_t seed) {
  if (n_days < 3) fail(Errc::invalid_argument, "synthetic dataset needs n_days >= 3");
  const GridSpec& g = *grid;
  g.validate();
  if (g.n_sea() == 0) fail(Errc::mask_mismatch, "grid has no sea cells");

  const int n_lat = g.n_lat(), n_lon = g.n_lon();
  const std::size_t n_cells = g.n_cells();
  const double lat_min = g.lats.front();
  const double lat_span = std::max(1e-9, g.lats.back() - lat_min);
  const double lon_min = g.lons.front();
  const double lon_span = std::max(1e-9, g.lons.back() - lon_min);

  TimeSeries s;
  s.grid = grid;
  s.vars = {Var::sst, Var::u10, Var::v10, Var::bathymetry};
  s.epoch_day = 0;
  s.data.assign(static_cast<std::size_t>(n_days) * s.frame(), 0.0f);

  // SST anomaly waves: slow traveling cosines across the domain.
  Rng wave_rng(mix_seed(seed, 11));
  constexpr int kWaves = 3;
  const double wave_amp[kWaves] = {0.35, 0.25, 0.20};
  const double wave_p[kWaves] = {1.3, 2.4, 0.7};
  const double wave_q[kWaves] = {2.1, -1.2, 3.3};
  const double wave_speed[kWaves] = {1.0 / 40.0, 1.0 / 60.0, 1.0 / 27.0};
  double wave_phase[kWaves];
  for (double& p : wave_phase) p = kTwoPi * wave_rng.unit();

  // Smooth spatial modes shared by the wind fields and the daily innovation.
  constexpr int kModes = 4;
  double mode_p[kModes], mode_q[kModes], mode_phase[2 * kModes];
  Rng mode_rng(mix_seed(seed, 12));
  for (int m = 0; m < kModes; ++m) {
    mode_p[m] = 0.5 + 2.5 * mode_rng.unit();
    mode_q[m] = 0.5 + 2.5 * mode_rng.unit();
    mode_phase[2 * m] = kTwoPi * mode_rng.unit();
    mode_phase[2 * m + 1] = kTwoPi * mode_rng.unit();
  }
  auto mode_at = [&](int m, int phase_slot, double fi, double fj) {
    return std::cos(kTwoPi * (mode_p[m] * fi + mode_q[m] * fj) + mode_phase[2 * m + phase_slot]);
  };

  // AR(1) coefficients, one pair per mode, driving u10 and v10.
  Rng ar_rng(mix_seed(seed, 13));
  constexpr double kArRho = 0.8;
  const double ar_sigma = std::sqrt(1.0 - kArRho * kArRho);
  std::vector<double> au(kModes, 0.0), av(kModes, 0.0);
  for (int spin = 0; spin < 20; ++spin) {
    for (int m = 0; m < kModes; ++m) {
      au[m] = kArRho * au[m] + ar_sigma * ar_rng.normal();
      av[m] = kArRho * av[m] + ar_sigma * ar_rng.normal();
    }
  }

  Rng innov_rng(mix_seed(seed, 14));

  const int sst_k = s.var_index(Var::sst);
  const int u_k = s.var_index(Var::u10);
  const int v_k = s.var_index(Var::v10);
  const int b_k = s.var_index(Var::bathymetry);

  std::vector<double> couple(n_cells, 0.0);

  for (int t = 0; t < n_days; ++t) {
    if (t > 0) {
      for (int m = 0; m < kModes; ++m) {
        au[m] = kArRho * au[m] + ar_sigma * ar_rng.normal();
        av[m] = kArRho * av[m] + ar_sigma * ar_rng.normal();
      }
    }
    double innov_coef[kModes];
    for (int m = 0; m < kModes; ++m) innov_coef[m] = innov_rng.normal();

    const double season = std::cos(kTwoPi * (t - 30.0) / 365.25);
    float* sst = s.frame_at(t, sst_k);
    float* u10 = s.frame_at(t, u_k);
    float* v10 = s.frame_at(t, v_k);
    float* bathy = s.frame_at(t, b_k);

    for (int i = 0; i < n_lat; ++i) {
      const double dlat = g.lats[i] - lat_min;
      const double fi = dlat / lat_span;
      for (int j = 0; j < n_lon; ++j) {
        const std::size_t c = g.cell(i, j);
        const double fj = (g.lons[j] - lon_min) / lon_span;

        double u = 2.0, v = 1.0;
        for (int m = 0; m < kModes; ++m) {
          u += 5.0 * au[m] * mode_at(m, 0, fi, fj) / kModes;
          v += 5.0 * av[m] * mode_at(m, 1, fi, fj) / kModes;
        }

        // Wind-driven SST component, relaxing toward zero and forced by the
        // same-day wind anomalies.
        couple[c] = 0.8 * couple[c] + 0.05 * (u - 2.0) + 0.04 * (v - 1.0);

        double waves = 0.0;
        for (int w = 0; w < kWaves; ++w)
          waves += wave_amp[w] *
                   std::cos(kTwoPi * (wave_p[w] * fi + wave_q[w] * fj - wave_speed[w] * t) +
                            wave_phase[w]);

        double innov = 0.0;
        for (int m = 0; m < kModes; ++m)
          innov += 0.03 * innov_coef[m] * mode_at(m, t % 2, fi, fj);

        const double clim = 295.0 - 0.45 * dlat + (1.8 + 0.02 * dlat) * season;
        const double depth =
            80.0 + 3900.0 * (1.0 - fj) * (0.75 + 0.25 * std::cos(2.0 * fi));

        const bool sea = g.is_sea(c);
        sst[c] = sea ? static_cast<float>(clim + waves + couple[c] + innov) : missing_value();
        u10[c] = sea ? static_cast<float>(u) : missing_value();
        v10[c] = sea ? static_cast<float>(v) : missing_value();
        bathy[c] = sea ? static_cast<float>(depth) : 0.0f;
      }
    }
  }
  return s;
}

}  // namespace ecast
