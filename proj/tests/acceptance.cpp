// Acceptance harness. Each criterion prints exactly one PASS/FAIL line with
// the measured values next to the required bounds; the process exits nonzero
// if any criterion fails. Criteria 8 and 9 reuse the model trained in
// criterion 7; criterion 10 drives the installed ecast binary end to end.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ensemblecast/ensemble.hpp"
#include "ensemblecast/mesh.hpp"
#include "ensemblecast/rng.hpp"
#include "ensemblecast/train.hpp"
#include "ensemblecast/verify.hpp"

namespace fs = std::filesystem;
using namespace ecast;

namespace {

int g_failures = 0;

void report(int n, const char* name, bool ok, const std::string& detail) {
  std::printf("criterion %2d (%s): %s — %s\n", n, name, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Synthetic all-sea forecast whose member values come from gen(member, lead,
// cell); the mean is the library reduction.
template <typename Gen>
EnsembleForecast synthetic_forecast(GridPtr grid, int members, int horizon, Gen&& gen) {
  const std::size_t n = grid->n_cells();
  EnsembleForecast fc;
  fc.config.members = members;
  fc.config.horizon = horizon;
  fc.start_day = 0;
  fc.members.reserve(members);
  for (int m = 0; m < members; ++m) {
    Trajectory traj{grid, 0, {}};
    traj.states.resize(horizon);
    for (int l = 0; l < horizon; ++l) {
      traj.states[l].resize(n);
      for (std::size_t c = 0; c < n; ++c)
        traj.states[l][c] = static_cast<float>(gen(m, l, c));
    }
    fc.members.push_back(std::move(traj));
  }
  fc.mean = ensemble_mean(fc.members);
  return fc;
}

template <typename Gen>
TimeSeries synthetic_truth(GridPtr grid, int n_days, Gen&& gen) {
  const std::size_t n = grid->n_cells();
  TimeSeries s;
  s.grid = grid;
  s.vars = {Var::sst};
  s.data.resize(static_cast<std::size_t>(n_days) * n);
  for (int t = 0; t < n_days; ++t)
    for (std::size_t c = 0; c < n; ++c)
      s.data[static_cast<std::size_t>(t) * n + c] = static_cast<float>(gen(t, c));
  return s;
}

// --- criterion 1 -----------------------------------------------------------

void crit_gaussian_crps() {
  const auto t0 = std::chrono::steady_clock::now();
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(100, 100, 20.0, 30.0, -20.0, -10.0));
  const int members = 1000;

  std::mt19937_64 g(2024);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<EnsembleForecast> fcs;
  fcs.push_back(
      synthetic_forecast(grid, members, 1, [&](int, int, std::size_t) { return nd(g); }));
  const TimeSeries truth = synthetic_truth(grid, 2, [](int t, std::size_t) {
    return t == 1 ? 0.5 : 0.0;
  });

  const MetricSeries ms = verify_ensemble(fcs, truth);
  const double crps = ms.leads[0].crps;

  // CRPS of Normal(0, 1) against o: z(2*Phi(z) - 1) + 2*phi(z) - 1/sqrt(pi).
  const double pi = std::numbers::pi;
  const double z = 0.5;
  const double cdf = 0.5 * (1.0 + std::erf(z / std::sqrt(2.0)));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi);
  const double exact = z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(pi);

  const double rel = std::abs(crps - exact) / exact;
  const double dt = seconds_since(t0);
  report(1, "gaussian crps oracle", rel < 0.01 && dt < 30.0,
         fmt("fair crps %.6f vs closed form %.6f over 10^4 cells, M=%d; rel err %.3f%% (<1%%); "
             "%.1fs (<30s)",
             crps, exact, members, 100.0 * rel, dt));
}

// --- criterion 2 -----------------------------------------------------------

void crit_decomposition_identity() {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(40, 30, 21.0, 29.0, -19.0, -11.0));
  std::mt19937_64 g(7);
  std::normal_distribution<double> nd(0.0, 1.0);

  const int horizon = 6;
  std::vector<EnsembleForecast> fcs;
  for (int start : {0, 2}) {
    EnsembleForecast fc = synthetic_forecast(
        grid, 25, horizon, [&](int, int l, std::size_t) { return (1.0 + 3.0 * l) * nd(g); });
    fc.start_day = start;
    fcs.push_back(std::move(fc));
  }
  const TimeSeries truth =
      synthetic_truth(grid, 9, [&](int, std::size_t) { return nd(g); });

  const MetricSeries ms = verify_ensemble(fcs, truth);
  double worst = 0.0;
  for (const LeadMetrics& lm : ms.leads) {
    const double resid = std::abs(lm.crps - (lm.crps_skill - 0.5 * lm.crps_spread));
    worst = std::max(worst, resid / std::abs(lm.crps));
  }
  report(2, "crps decomposition identity", worst < 1e-12,
         fmt("max |crps - (skill - spread/2)| = %.3g relative over %zu leads (<1e-12)", worst,
             ms.leads.size()));
}

// --- criterion 3 -----------------------------------------------------------

void crit_calibration() {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(100, 100, 20.0, 30.0, -20.0, -10.0));
  const int members = 100, horizon = 10;

  std::mt19937_64 g(5150);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<EnsembleForecast> fcs;
  fcs.push_back(
      synthetic_forecast(grid, members, horizon, [&](int, int, std::size_t) { return nd(g); }));
  const TimeSeries truth =
      synthetic_truth(grid, horizon + 1, [&](int, std::size_t) { return nd(g); });

  const MetricSeries ms = verify_ensemble(fcs, truth);
  double lo = ms.leads[0].ssr, hi = ms.leads[0].ssr;
  for (const LeadMetrics& lm : ms.leads) {
    lo = std::min(lo, lm.ssr);
    hi = std::max(hi, lm.ssr);
  }
  report(3, "reliable-ensemble calibration", lo >= 0.95 && hi <= 1.05,
         fmt("ssr in [%.4f, %.4f] over %d leads, M=%d, 10^4 cells (allowed [0.95, 1.05])", lo,
             hi, horizon, members));
}

// --- criterion 4 -----------------------------------------------------------

void crit_pythagorean() {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(6, 5, 22.0, 27.0, -18.0, -14.0));
  const std::size_t n = grid->n_cells();
  std::mt19937_64 g(99);
  std::normal_distribution<double> state(290.0, 2.0), noise(0.0, 0.5);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);

  double worst = 0.0;
  int leads = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int horizon = 1 + trial % 3;
    const TimeSeries truth =
        synthetic_truth(grid, horizon + 1, [&](int, std::size_t) { return state(g); });
    const double mu = shift(g);
    Trajectory pred{grid, 0, {}};
    pred.states.resize(horizon);
    for (int l = 0; l < horizon; ++l) {
      pred.states[l].resize(n);
      const float* obs = truth.frame_at(l + 1, 0);
      for (std::size_t c = 0; c < n; ++c)
        pred.states[l][c] = static_cast<float>(obs[c] + mu + noise(g));
    }
    for (const RmseBias& rb : rmse_and_bias(pred, truth)) {
      const double resid =
          std::abs(rb.rmse * rb.rmse - (rb.bias * rb.bias + rb.rmse_debiased * rb.rmse_debiased));
      worst = std::max(worst, resid / (rb.rmse * rb.rmse));
      ++leads;
    }
  }
  report(4, "pythagorean rmse identity", worst < 1e-12,
         fmt("max |rmse^2 - (bias^2 + debiased^2)| = %.3g relative over %d leads from 1000 "
             "random trials (<1e-12)",
             worst, leads));
}

// --- criterion 5 -----------------------------------------------------------

bool corners_zero_2d(std::array<int, 2> shape, std::array<int, 2> res,
                     std::array<bool, 2> tileable, std::uint64_t seed) {
  const NoiseField f = perlin_field2(shape, res, tileable, seed);
  const int dy = (shape[0] + res[0] - 1) / res[0];
  const int dx = (shape[1] + res[1] - 1) / res[1];
  for (int y = 0; y < shape[0]; y += dy)
    for (int x = 0; x < shape[1]; x += dx)
      if (f.at2(y, x) != 0.0) return false;
  return true;
}

void crit_noise_invariants() {
  // (a) zero at lattice corners, divisible and padded shapes, 2D and 3D
  bool corners = corners_zero_2d({60, 45}, {3, 5}, {false, false}, 9) &&
                 corners_zero_2d({10, 10}, {3, 3}, {false, false}, 21);
  {
    const NoiseField f = perlin_field3({4, 12, 12}, {2, 3, 4}, {false, false, false}, 3);
    for (int t = 0; t < 4; t += 2)
      for (int y = 0; y < 12; y += 4)
        for (int x = 0; x < 12; x += 3)
          if (f.at3(t, y, x) != 0.0) corners = false;
  }

  // (b) tileable axes repeat bit-exactly, one and two periods out
  bool periodic = true;
  {
    const PerlinLattice2 lat({4, 3}, {true, true}, 11);
    const int dy = 7, dx = 9;
    for (int ky = 0; ky < 4 * dy; ++ky)
      for (int kx = 0; kx < 3 * dx; ++kx) {
        const double base = lat.sample(ky, kx, dy, dx);
        if (lat.sample(ky + 4 * dy, kx, dy, dx) != base ||
            lat.sample(ky, kx + 3 * dx, dy, dx) != base ||
            lat.sample(ky + 8 * dy, kx + 6 * dx, dy, dx) != base)
          periodic = false;
      }
    const PerlinLattice3 lat3({2, 3, 4}, {true, true, true}, 5);
    const int d = 5;
    for (int kt = 0; kt < 2 * d; ++kt)
      for (int ky = 0; ky < 3 * d; ++ky)
        for (int kx = 0; kx < 4 * d; ++kx) {
          const double base = lat3.sample(kt, ky, kx, d, d, d);
          if (lat3.sample(kt + 2 * d, ky, kx, d, d, d) != base ||
              lat3.sample(kt, ky + 3 * d, kx, d, d, d) != base ||
              lat3.sample(kt, ky, kx + 4 * d, d, d, d) != base ||
              lat3.sample(kt + 2 * d, ky + 3 * d, kx + 4 * d, d, d, d) != base)
            periodic = false;
        }
  }

  // (c) fractal alpha is an exact final scale
  bool alpha_linear = true;
  {
    FractalPerlinCfg cfg;
    cfg.shape = {24, 24};
    cfg.res = {2, 3};
    cfg.tileable = {true, false};
    cfg.octaves = 3;
    cfg.persistence = 0.6;
    cfg.lacunarity = 2;
    cfg.alpha = 1.0;
    const NoiseField base = fractal_perlin_field(cfg.shape, cfg, 77);
    cfg.alpha = 0.37;
    const NoiseField scaled = fractal_perlin_field(cfg.shape, cfg, 77);
    for (std::size_t i = 0; i < base.values.size(); ++i)
      if (scaled.values[i] != 0.37 * base.values[i]) alpha_linear = false;
  }

  // (d) gaussian sample std within 5% of sigma at 64^3
  const NoiseField gf = gaussian_field({64, 64, 64}, 0.0, 0.7, 123);
  double sum = 0.0, sumsq = 0.0;
  for (double v : gf.values) {
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(gf.values.size());
  const double sd = std::sqrt(sumsq / n - (sum / n) * (sum / n));
  const bool std_ok = std::abs(sd - 0.7) / 0.7 < 0.05;

  // (e) indivisible tileable axes raise ResolutionMismatch
  bool raises = false, raises_fractal = false;
  try {
    perlin_field2({10, 12}, {3, 4}, {true, false}, 1);
  } catch (const Error& e) {
    raises = e.code() == Errc::resolution_mismatch;
  }
  try {
    FractalPerlinCfg cfg;
    cfg.shape = {30, 30};
    cfg.res = {3, 3};
    cfg.tileable = {false, true};
    cfg.octaves = 3;
    cfg.lacunarity = 2;
    fractal_perlin_field(cfg.shape, cfg, 1);
  } catch (const Error& e) {
    raises_fractal = e.code() == Errc::resolution_mismatch;
  }

  report(5, "noise invariants",
         corners && periodic && alpha_linear && std_ok && raises && raises_fractal,
         fmt("corners zero %s; periods bit-exact %s; alpha linear %s; 64^3 std %.4f vs 0.7 "
             "(%.2f%% err, <5%%); mismatch raised %s/%s",
             corners ? "yes" : "NO", periodic ? "yes" : "NO", alpha_linear ? "yes" : "NO", sd,
             100.0 * std::abs(sd - 0.7) / 0.7, raises ? "yes" : "NO",
             raises_fractal ? "yes" : "NO"));
}

// --- criterion 6 -----------------------------------------------------------

void crit_gradients() {
  double worst_stencil = 0.0;
  {
    auto grid = std::make_shared<GridSpec>(make_synthetic_grid(6, 6));
    const TimeSeries s = make_synthetic_dataset(grid, 30, 5);
    const DatasetSplit split{{0, 24}, {24, 27}, {27, 30}};
    const NormStats st = compute_norm_stats(s, split);
    std::mt19937_64 g(17);
    for (int i = 0; i < 20; ++i) {
      auto stencil = make_linear_stencil();
      Rng rng(1000 + static_cast<std::uint64_t>(i));
      for (std::size_t k = 0; k < stencil->n_params(); ++k)
        stencil->param_data()[k] = rng.normal(0.0, 0.05);
      const int horizon = 1 + i % 2;
      const int t0 = 1 + static_cast<int>(g() % static_cast<std::uint64_t>(29 - horizon));
      worst_stencil = std::max(worst_stencil, gradient_check(*stencil, s, st, t0, horizon, 1e-5));
    }
  }

  double worst_graph = 0.0;
  {
    auto grid = std::make_shared<GridSpec>(make_uniform_grid(4, 3, 21.0, 28.0, -15.0, -12.0));
    const TimeSeries s = make_synthetic_dataset(grid, 26, 19);
    const DatasetSplit split{{0, 20}, {20, 23}, {23, 26}};
    const NormStats st = compute_norm_stats(s, split);
    auto mesh = std::make_shared<HierMesh>(build_hier_mesh(*grid, {2}));
    auto graph = make_graph_stepper(grid, mesh, 16, 1, 3);
    std::mt19937_64 g(23);
    for (int i = 0; i < 20; ++i) {
      Rng rng(2000 + static_cast<std::uint64_t>(i));
      for (std::size_t k = 0; k < graph->n_params(); ++k)
        graph->param_data()[k] = rng.normal(0.0, 0.3);
      // Central differences on the graph loss are roundoff-bound below
      // eps ~ 1e-4 and truncation-bound above ~2e-4; probe in the basin.
      const int t0 = 1 + static_cast<int>(g() % 24);
      worst_graph = std::max(worst_graph, gradient_check(*graph, s, st, t0, 1, 1e-4));
    }
  }

  report(6, "gradient correctness", worst_stencil < 1e-4 && worst_graph < 1e-4,
         fmt("max rel err over 20 samples each: stencil %.3g, graph %.3g (<1e-4)",
             worst_stencil, worst_graph));
}

// --- criterion 7 (trains the model reused by 8 and 9) -----------------------

struct Trained {
  GridPtr grid;
  TimeSeries series;
  DatasetSplit split;
  NormStats stats;
  std::unique_ptr<Stepper> stencil;
};

Trained crit_learning_signal() {
  const auto t0 = std::chrono::steady_clock::now();
  Trained tr;
  tr.grid = std::make_shared<GridSpec>(make_synthetic_grid(32, 32));
  tr.series = make_synthetic_dataset(tr.grid, 160, 2026);
  tr.split = DatasetSplit{{0, 120}, {120, 140}, {140, 160}};
  tr.stats = compute_norm_stats(tr.series, tr.split);
  const double rmse_pers = one_step_rmse(*make_persistence(), tr.series, tr.stats, tr.split.val);

  TrainConfig scfg;
  scfg.lr = 0.02;
  scfg.epochs = 20;
  scfg.warmup_epochs = 5;
  scfg.batch_size = 8;
  TrainResult sres = train(*make_linear_stencil(), tr.series, tr.split, tr.stats, scfg, 7);
  const double rmse_stencil = one_step_rmse(*sres.stepper, tr.series, tr.stats, tr.split.val);
  tr.stencil = std::move(sres.stepper);

  auto mesh = std::make_shared<HierMesh>(build_hier_mesh(*tr.grid, {9, 5}));
  auto proto = make_graph_stepper(tr.grid, mesh, 16, 2, 15);
  TrainConfig gcfg;
  gcfg.lr = 3e-3;
  gcfg.epochs = 12;
  gcfg.warmup_epochs = 2;
  gcfg.batch_size = 8;
  const TrainResult gres = train(*proto, tr.series, tr.split, tr.stats, gcfg, 7);
  const double rmse_graph = one_step_rmse(*gres.stepper, tr.series, tr.stats, tr.split.val);

  const double imp_stencil = 100.0 * (rmse_pers - rmse_stencil) / rmse_pers;
  const double imp_graph = 100.0 * (rmse_pers - rmse_graph) / rmse_pers;
  const double dt = seconds_since(t0);
  report(7, "learning signal", imp_stencil >= 10.0 && imp_graph >= 5.0 && dt < 600.0,
         fmt("val one-step rmse vs persistence %.4f: stencil %.4f (+%.1f%%, >=10%%), graph "
             "%.4f (+%.1f%%, >=5%%); %.0fs (<600s)",
             rmse_pers, rmse_stencil, imp_stencil, rmse_graph, imp_graph, dt));
  return tr;
}

// --- criterion 8 -----------------------------------------------------------

void crit_sigma_trend(const Trained& tr) {
  if (!tr.stencil) {
    report(8, "perturbation-size trend", false, "trained stencil unavailable");
    return;
  }
  const std::vector<int> starts{121, 126, 131, 136, 141};
  const int horizon = 15;

  std::vector<double> det_mse(horizon, 0.0);
  for (int sd : starts) {
    const Trajectory traj = rollout_from_series(*tr.stencil, tr.stats, tr.series, sd, horizon);
    const auto rb = rmse_and_bias(traj, tr.series);
    for (int l = 0; l < horizon; ++l) det_mse[l] += rb[l].rmse * rb[l].rmse;
  }
  const double det1 = std::sqrt(det_mse[0] / starts.size());
  const double det15 = std::sqrt(det_mse[14] / starts.size());

  const double sigmas[] = {0.01, 0.05, 0.1};
  double inc1[3], inc15[3];
  for (int i = 0; i < 3; ++i) {
    EnsembleConfig ec;
    ec.members = 8;
    ec.horizon = horizon;
    ec.base_seed = 42;
    ec.noise = GaussianCfg{0.0, sigmas[i]};
    std::vector<EnsembleForecast> fcs;
    for (int sd : starts)
      fcs.push_back(run_ensemble_from_series(*tr.stencil, tr.stats, tr.series, sd, ec, 4));
    const MetricSeries ms = verify_ensemble(fcs, tr.series);
    inc1[i] = 100.0 * (ms.leads[0].rmse - det1) / det1;
    inc15[i] = 100.0 * (ms.leads[14].rmse - det15) / det15;
  }

  const bool monotone = inc1[0] <= inc1[1] && inc1[1] <= inc1[2];
  const bool decays = inc15[2] < inc1[2];
  report(8, "perturbation-size trend", monotone && decays,
         fmt("day-1 rmse increase %.3f%% <= %.3f%% <= %.3f%% over sigma {0.01, 0.05, 0.1}; "
             "sigma 0.1 at lead 15: %.3f%% < %.3f%% at lead 1",
             inc1[0], inc1[1], inc1[2], inc15[2], inc1[2]));
}

// --- criterion 9 -----------------------------------------------------------

void crit_zero_noise(const Trained& tr) {
  if (!tr.stencil) {
    report(9, "zero-noise collapse", false, "trained stencil unavailable");
    return;
  }
  const int start = 130, horizon = 12;
  EnsembleConfig ec;
  ec.members = 4;
  ec.horizon = horizon;
  ec.base_seed = 9;
  ec.noise = GaussianCfg{0.0, 0.0};
  const EnsembleForecast fc =
      run_ensemble_from_series(*tr.stencil, tr.stats, tr.series, start, ec, 2);
  const Trajectory det = rollout_from_series(*tr.stencil, tr.stats, tr.series, start, horizon);

  const std::size_t bytes = tr.grid->n_cells() * sizeof(float);
  bool bit_exact = true;
  for (int l = 0; l < horizon; ++l) {
    if (std::memcmp(fc.mean.states[l].data(), det.states[l].data(), bytes) != 0)
      bit_exact = false;
    for (const Trajectory& m : fc.members)
      if (std::memcmp(m.states[l].data(), det.states[l].data(), bytes) != 0) bit_exact = false;
  }

  const MetricSeries ms = verify_ensemble({fc}, tr.series);
  bool spread_zero = true;
  for (const LeadMetrics& lm : ms.leads)
    if (lm.spread != 0.0 || lm.crps_spread != 0.0 || lm.ssr != 0.0 ||
        lm.crps != lm.crps_skill)
      spread_zero = false;

  report(9, "zero-noise collapse", bit_exact && spread_zero,
         fmt("4 members and mean bit-identical to the deterministic rollout at %d leads: %s; "
             "spread, crps_spread, ssr all exactly 0: %s",
             horizon, bit_exact ? "yes" : "NO", spread_zero ? "yes" : "NO"));
}

// --- criterion 10 ----------------------------------------------------------

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool run_step(const fs::path& dir, int threads, const std::string& args) {
  std::ostringstream cmd;
  cmd << "cd '" << dir.string() << "' && ENSEMBLECAST_THREADS=" << threads << " '"
      << ECAST_BUILD_DIR << "/ecast' " << args << " >> log.txt 2>&1";
  const int rc = std::system(cmd.str().c_str());
  return WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
}

void crit_pipeline_determinism() {
  const fs::path root = fs::temp_directory_path() / "ecast_acceptance";
  fs::remove_all(root);
  fs::create_directories(root / "t1");
  fs::create_directories(root / "t8");

  const fs::path cfg = root / "experiment.ini";
  {
    std::ofstream os(cfg);
    os << "[data]\ndays = 80\ngrid = 20x24\nseed = 33\n\n"
       << "[split]\ntrain = 0:60\nval = 60:70\ntest = 70:80\n\n"
       << "[stepper]\nkind = linear\n\n"
       << "[train]\nlr = 0.02\nepochs = 8\nwarmup_epochs = 2\nbatch_size = 8\n";
  }

  const std::string steps[] = {
      "synth --config '" + cfg.string() + "' --out data.ofs1",
      "train --config '" + cfg.string() + "' --data data.ofs1 --out model.omp1 --seed 4",
      "forecast --model model.omp1 --data data.ofs1 --out det.ofs1 --start-day 68 --horizon 8",
      "ensemble --model model.omp1 --data data.ofs1 --out ens.ofs1 --start-day 68 --starts 2 "
      "--stride 3 --horizon 8 --members 6 --seed 7 --preset gauss_0.05",
      "verify ens_day0068.ofs1 ens_day0071.ofs1 --data data.ofs1 --out metrics.csv",
      "verify det.ofs1 --data data.ofs1 --out met_det.csv",
      "report met_det.csv metrics.csv --out report.csv",
  };

  bool ran = true;
  std::string failed_step;
  for (const auto& [dir, threads] : {std::pair<const char*, int>{"t1", 1}, {"t8", 8}})
    for (const std::string& s : steps)
      if (!run_step(root / dir, threads, s)) {
        ran = false;
        if (failed_step.empty())
          failed_step = s.substr(0, s.find(' ')) + " under " + std::string(dir);
      }

  const char* artifacts[] = {"data.ofs1",        "model.omp1",  "det.ofs1",
                             "ens_day0068.ofs1", "ens_day0071.ofs1", "metrics.csv",
                             "met_det.csv",      "report.csv"};
  int identical = 0;
  std::string diff;
  for (const char* a : artifacts) {
    const std::string b1 = file_bytes(root / "t1" / a);
    if (!b1.empty() && b1 == file_bytes(root / "t8" / a))
      ++identical;
    else if (diff.empty())
      diff = a;
  }

  const bool ok = ran && identical == 8;
  std::string detail;
  if (!ran)
    detail = "pipeline step failed: " + failed_step + " (see " + (root / "t1/log.txt").string() +
             ")";
  else
    detail = fmt("%d/8 artifacts byte-identical between thread caps 1 and 8%s%s", identical,
                 identical == 8 ? "" : "; first difference: ", diff.c_str());
  report(10, "pipeline determinism", ok, detail);
}

}  // namespace

int main() {
  crit_gaussian_crps();
  crit_decomposition_identity();
  crit_calibration();
  crit_pythagorean();
  crit_noise_invariants();
  crit_gradients();
  const Trained tr = crit_learning_signal();
  crit_sigma_trend(tr);
  crit_zero_noise(tr);
  crit_pipeline_determinism();

  std::printf("acceptance: %d/10 criteria passed\n", 10 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
