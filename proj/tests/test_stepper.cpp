#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "ensemblecast/errors.hpp"
#include "ensemblecast/mesh.hpp"
#include "ensemblecast/rng.hpp"
#include "ensemblecast/stepper.hpp"

using namespace ecast;

namespace {

NormStats hand_stats() {
  NormStats st;
  st.per_var.emplace(Var::sst, VarStats(290.0, 2.0, 0.125, 0.5, true));
  st.per_var.emplace(Var::u10, VarStats(2.0, 1.0, 0.0, 1.0, true));
  st.per_var.emplace(Var::v10, VarStats(1.0, 1.0, 0.0, 1.0, true));
  st.per_var.emplace(Var::bathymetry, VarStats(500.0, 100.0, 0.0, 0.0, false));
  return st;
}

// Constant forcing (u10 = 2, v10 = 1, bathymetry = 500), sst from a callback.
template <typename F>
TimeSeries toy_series(GridPtr grid, int days, F sst_of) {
  TimeSeries s;
  s.grid = grid;
  s.vars = {Var::sst, Var::u10, Var::v10, Var::bathymetry};
  s.epoch_day = 0;
  s.data.resize(static_cast<std::size_t>(days) * s.frame());
  for (int t = 0; t < days; ++t) {
    float* sst = s.frame_at(t, 0);
    float* u = s.frame_at(t, 1);
    float* v = s.frame_at(t, 2);
    float* b = s.frame_at(t, 3);
    for (std::size_t c = 0; c < grid->n_cells(); ++c) {
      const bool sea = grid->is_sea(c);
      sst[c] = sea ? sst_of(t, c) : missing_value();
      u[c] = sea ? 2.0f : missing_value();
      v[c] = sea ? 1.0f : missing_value();
      b[c] = sea ? 500.0f : 0.0f;
    }
  }
  return s;
}

StepInput input_at(const TimeSeries& s, const NormStats& st, int target) {
  StepInput in;
  in.grid = s.grid;
  in.stats = &st;
  in.prev2 = s.frame_at(target - 2, s.var_index(Var::sst));
  in.prev1 = s.frame_at(target - 1, s.var_index(Var::sst));
  in.u10 = s.frame_at(target, s.var_index(Var::u10));
  in.v10 = s.frame_at(target, s.var_index(Var::v10));
  in.bathy = s.frame_at(target, s.var_index(Var::bathymetry));
  in.target_day = s.epoch_day + target;
  return in;
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("input channels: normalization, geometry and calendar features") {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(2, 2, 30.0, 40.0, -20.0, -10.0));
  auto g = std::make_shared<GridSpec>(*grid);
  const_cast<GridSpec&>(*g).sea_mask = {1, 1, 1, 0};
  const NormStats st = hand_stats();
  TimeSeries s = toy_series(g, 3, [](int t, std::size_t c) {
    return 290.0f + static_cast<float>(t) + static_cast<float>(c);
  });
  const StepInput fin = input_at(s, st, 2);
  StepInputD in;
  std::vector<double> p2(4), p1(4);
  for (std::size_t c = 0; c < 4; ++c) {
    p2[c] = fin.prev2[c];
    p1[c] = fin.prev1[c];
  }
  in.grid = g;
  in.stats = &st;
  in.prev2 = p2.data();
  in.prev1 = p1.data();
  in.u10 = fin.u10;
  in.v10 = fin.v10;
  in.bathy = fin.bathy;
  in.target_day = 40;

  const std::vector<double> ch = build_input_channels(in);
  REQUIRE(ch.size() == 11 * 4);
  // Cell 0: sst(t-2) = 290, sst(t-1) = 291.
  CHECK(ch[0 * 4 + 0] == doctest::Approx((290.0 - 290.0) / 2.0));
  CHECK(ch[1 * 4 + 0] == doctest::Approx((291.0 - 290.0) / 2.0));
  CHECK(ch[2 * 4 + 0] == doctest::Approx(0.0));              // u10 = mean
  CHECK(ch[3 * 4 + 0] == doctest::Approx(0.0));              // v10 = mean
  CHECK(ch[4 * 4 + 0] == doctest::Approx(0.0));              // bathy = mean
  const double rad = std::numbers::pi / 180.0;
  CHECK(ch[5 * 4 + 0] == doctest::Approx(std::sin(30.0 * rad)));
  CHECK(ch[6 * 4 + 0] == doctest::Approx(std::cos(30.0 * rad)));
  CHECK(ch[7 * 4 + 0] == doctest::Approx(std::sin(-20.0 * rad)));
  CHECK(ch[8 * 4 + 0] == doctest::Approx(std::cos(-20.0 * rad)));
  const double ang = 2.0 * std::numbers::pi * 40.0 / kDaysPerYear;
  CHECK(ch[9 * 4 + 0] == doctest::Approx(std::sin(ang)));
  CHECK(ch[10 * 4 + 0] == doctest::Approx(std::cos(ang)));
  // Land cell 3: dynamic channels zeroed, static geometry kept.
  CHECK(ch[0 * 4 + 3] == 0.0);
  CHECK(ch[1 * 4 + 3] == 0.0);
  CHECK(ch[4 * 4 + 3] == 0.0);
  CHECK(ch[5 * 4 + 3] == doctest::Approx(std::sin(40.0 * rad)));
}

TEST_CASE("persistence step returns the previous state exactly") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(8, 8));
  const NormStats st = hand_stats();
  TimeSeries s = toy_series(grid, 3, [](int t, std::size_t c) {
    return 285.0f + 0.25f * static_cast<float>(t) + 0.01f * static_cast<float>(c);
  });
  auto p = make_persistence();
  CHECK(std::string(p->kind()) == "persistence");
  CHECK(p->n_params() == 0);
  const std::vector<float> out = p->step(input_at(s, st, 2));
  CHECK(std::memcmp(out.data(), s.frame_at(1, 0), out.size() * sizeof(float)) == 0);
}

TEST_CASE("zero stencil and fresh graph stepper predict diff_mean") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(6, 7));
  const NormStats st = hand_stats();
  TimeSeries s = toy_series(grid, 3, [](int t, std::size_t c) {
    return 288.0f + 0.5f * static_cast<float>(t) + 0.02f * static_cast<float>(c % 5);
  });
  const StepInput in = input_at(s, st, 2);
  const double diff_mean = st.of(Var::sst).diff_mean;

  auto check_diff_mean = [&](const Stepper& m) {
    const std::vector<float> out = m.step(in);
    for (std::size_t c = 0; c < grid->n_cells(); ++c) {
      if (!grid->is_sea(c)) {
        CHECK(std::isnan(out[c]));
        continue;
      }
      const float want = static_cast<float>(static_cast<double>(in.prev1[c]) + diff_mean);
      CHECK(out[c] == want);
    }
  };
  auto stencil = make_linear_stencil();
  CHECK(stencil->n_params() == 100);
  check_diff_mean(*stencil);

  auto mesh = std::make_shared<HierMesh>(build_hier_mesh(*grid, {3, 2}));
  auto graphm = make_graph_stepper(grid, mesh, 16, 2, 42);
  CHECK(std::string(graphm->kind()) == "graph");
  check_diff_mean(*graphm);
}

TEST_CASE("rollout: persistence is a fixed point and T=1 equals one step") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(6, 6));
  const NormStats st = hand_stats();
  TimeSeries s = toy_series(grid, 8, [](int t, std::size_t c) {
    return 284.0f + 0.125f * static_cast<float>(t + 1) * static_cast<float>(c % 3);
  });
  auto p = make_persistence();
  const Trajectory tr = rollout_from_series(*p, st, s, 2, 4);
  REQUIRE(tr.horizon() == 4);
  CHECK(tr.start_day == 2);
  const std::size_t bytes = grid->n_cells() * sizeof(float);
  for (int t = 0; t < 4; ++t)
    CHECK(std::memcmp(tr.states[t].data(), s.frame_at(2, 0), bytes) == 0);

  auto stencil = make_linear_stencil();
  Rng rng(9);
  for (std::size_t k = 0; k < stencil->n_params(); ++k)
    stencil->param_data()[k] = rng.normal(0.0, 0.05);
  const Trajectory one = rollout_from_series(*stencil, st, s, 2, 1);
  const std::vector<float> direct = stencil->step(input_at(s, st, 3));
  CHECK(std::memcmp(one.states[0].data(), direct.data(), bytes) == 0);
}

TEST_CASE("rollout: three-step scalar recursion on a one-cell grid") {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(1, 1, 25.0, 25.0, -10.0, -10.0));
  const NormStats st = hand_stats();
  TimeSeries s = toy_series(grid, 6, [](int t, std::size_t) {
    return 290.0f + 0.3f * static_cast<float>(t);
  });
  auto stencil = make_linear_stencil();
  stencil->param_data()[1 * 9 + 4] = 0.5;  // previous-day channel, center offset
  stencil->param_data()[99] = 0.25;        // bias

  const Trajectory tr = rollout_from_series(*stencil, st, s, 1, 3);
  float prev = s.frame_at(1, 0)[0];
  for (int t = 0; t < 3; ++t) {
    const double y = 0.25 + 0.5 * (static_cast<double>(prev) - 290.0) / 2.0;
    const float want = static_cast<float>(static_cast<double>(prev) + (y * 0.5 + 0.125));
    CHECK(tr.states[t][0] == want);
    prev = want;
  }
}

TEST_CASE("rollout consistency: T=a+b equals continuation from T=a states") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(7, 6));
  const NormStats st = hand_stats();
  TimeSeries s = toy_series(grid, 10, [](int t, std::size_t c) {
    return 286.0f + 0.2f * static_cast<float>(t) + 0.03f * static_cast<float>(c % 4);
  });
  auto stencil = make_linear_stencil();
  Rng rng(11);
  for (std::size_t k = 0; k < stencil->n_params(); ++k)
    stencil->param_data()[k] = rng.normal(0.0, 0.04);

  const Trajectory full = rollout_from_series(*stencil, st, s, 2, 5);
  const Trajectory head = rollout_from_series(*stencil, st, s, 2, 2);
  Field fp = make_field(grid, Var::sst);
  Field fc = make_field(grid, Var::sst);
  fp.values = head.states[0];
  fc.values = head.states[1];
  const Trajectory tail = rollout(*stencil, st, fp, fc, s, 5, 3);
  const std::size_t bytes = grid->n_cells() * sizeof(float);
  for (int t = 0; t < 3; ++t)
    CHECK(std::memcmp(tail.states[t].data(), full.states[t + 2].data(), bytes) == 0);
}

TEST_CASE("rollout requires enough forcing days") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(5, 5));
  const NormStats st = hand_stats();
  TimeSeries s = toy_series(grid, 5, [](int, std::size_t) { return 290.0f; });
  auto p = make_persistence();
  CHECK_THROWS_WITH_AS(rollout_from_series(*p, st, s, 2, 3), doctest::Contains("forcing"),
                       Error);
  try {
    rollout_from_series(*p, st, s, 2, 3);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_forcing);
  }
  CHECK_NOTHROW(rollout_from_series(*p, st, s, 2, 2));
}

TEST_CASE("loss: zero iff equal, hand value at lat 30, lambda linearity") {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(1, 1, 30.0, 30.0, -5.0, -5.0));
  NormStats st;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  st.per_var.emplace(Var::sst, VarStats(290.0, 2.0, 0.0, inv_sqrt2, true));  // lambda = 2

  Trajectory preds{grid, 0, {{290.5f}}};
  Trajectory targets{grid, 0, {{290.0f}}};
  const double loss = loss_weighted_mse(preds, targets, *grid, st);
  CHECK(loss == doctest::Approx(std::cos(30.0 * std::numbers::pi / 180.0) * 2.0 * 0.25)
                    .epsilon(1e-12));
  CHECK(loss == doctest::Approx(0.4330127).epsilon(1e-6));

  CHECK(loss_weighted_mse(preds, preds, *grid, st) == 0.0);

  NormStats st2;
  st2.per_var.emplace(Var::sst, VarStats(290.0, 2.0, 0.0, 0.5, true));  // lambda = 4
  CHECK(loss_weighted_mse(preds, targets, *grid, st2) == doctest::Approx(2.0 * loss));

  Trajectory longer{grid, 0, {{290.5f}, {290.5f}}};
  CHECK_THROWS_AS(loss_weighted_mse(longer, targets, *grid, st), Error);
  try {
    loss_weighted_mse(longer, targets, *grid, st);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::horizon_mismatch);
  }
}

TEST_CASE("observed trajectory copies the target frames") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(5, 4));
  TimeSeries s = toy_series(grid, 6, [](int t, std::size_t c) {
    return 280.0f + static_cast<float>(t) + 0.1f * static_cast<float>(c);
  });
  const Trajectory obs = observed_trajectory(s, 1, 3);
  REQUIRE(obs.horizon() == 3);
  const std::size_t bytes = grid->n_cells() * sizeof(float);
  for (int t = 0; t < 3; ++t)
    CHECK(std::memcmp(obs.states[t].data(), s.frame_at(2 + t, 0), bytes) == 0);
}

TEST_CASE("gradient check: persistence is exactly zero") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(5, 5));
  TimeSeries s = make_synthetic_dataset(grid, 10, 77);
  const DatasetSplit split{{0, 6}, {6, 8}, {8, 10}};
  const NormStats st = compute_norm_stats(s, split);
  auto p = make_persistence();
  CHECK(gradient_check(*p, s, st, 3, 1, 1e-5) == 0.0);
}

TEST_CASE("gradient check: linear stencil within 1e-5") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(6, 6));
  TimeSeries s = make_synthetic_dataset(grid, 12, 5);
  const DatasetSplit split{{0, 8}, {8, 10}, {10, 12}};
  const NormStats st = compute_norm_stats(s, split);
  auto stencil = make_linear_stencil();
  Rng rng(7);
  for (std::size_t k = 0; k < stencil->n_params(); ++k)
    stencil->param_data()[k] = rng.normal(0.0, 0.05);
  CHECK(gradient_check(*stencil, s, st, 4, 2, 1e-5) < 1e-5);
}

TEST_CASE("gradient check: graph stepper width 16 within 1e-4") {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(4, 3, 21.0, 28.0, -15.0, -12.0));
  TimeSeries s = make_synthetic_dataset(grid, 8, 19);
  const DatasetSplit split{{0, 4}, {4, 6}, {6, 8}};
  const NormStats st = compute_norm_stats(s, split);
  auto mesh = std::make_shared<HierMesh>(build_hier_mesh(*grid, {2}));
  auto g = make_graph_stepper(grid, mesh, 16, 1, 3);
  Rng rng(23);
  for (std::size_t k = 0; k < g->n_params(); ++k)
    g->param_data()[k] = rng.normal(0.0, 0.3);
  CHECK(gradient_check(*g, s, st, 3, 1, 3e-5) < 1e-4);
}

TEST_CASE("gradient check validates epsilon") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(5, 5));
  TimeSeries s = make_synthetic_dataset(grid, 8, 3);
  const DatasetSplit split{{0, 4}, {4, 6}, {6, 8}};
  const NormStats st = compute_norm_stats(s, split);
  auto p = make_persistence();
  CHECK_THROWS_AS(gradient_check(*p, s, st, 3, 1, 1e-2), Error);
  CHECK_THROWS_AS(gradient_check(*p, s, st, 3, 1, 1e-7), Error);
}

TEST_CASE("model files: stencil round-trips bit-exactly with f32-exact values") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(6, 5));
  NormStats st;
  st.per_var.emplace(Var::sst, VarStats(290.0, 2.0, 0.125, 0.5, true));
  st.per_var.emplace(Var::u10, VarStats(2.0, 1.0, 0.0, 1.0, true));
  st.per_var.emplace(Var::v10, VarStats(1.0, 1.0, 0.0, 1.0, true));
  st.per_var.emplace(Var::bathymetry, VarStats(500.0, 128.0, 0.0, 0.0, false));
  TimeSeries s = toy_series(grid, 3, [](int t, std::size_t c) {
    return 289.0f + 0.5f * static_cast<float>(t) + 0.25f * static_cast<float>(c % 3);
  });

  auto stencil = make_linear_stencil();
  for (std::size_t k = 0; k < stencil->n_params(); ++k)
    stencil->param_data()[k] = static_cast<double>(static_cast<int>(k % 13) - 6) / 64.0;
  const auto path = temp_path("ecast_stencil.omp1");
  save_model(*stencil, st, path);
  const LoadedModel loaded = load_model(path, grid);
  CHECK(std::string(loaded.stepper->kind()) == "linear_stencil");
  CHECK(loaded.stats.of(Var::sst).state_mean == 290.0);
  CHECK(loaded.stats.of(Var::sst).diff_std() == 0.5);
  CHECK(loaded.stats.of(Var::bathymetry).has_diff == false);

  const StepInput in = input_at(s, st, 2);
  const std::vector<float> a = stencil->step(in);
  const std::vector<float> b = loaded.stepper->step(in);
  for (std::size_t c = 0; c < grid->n_cells(); ++c)
    if (grid->is_sea(c)) CHECK(a[c] == b[c]);
  std::filesystem::remove(path);
}

TEST_CASE("model files: graph round-trip rebuilds mesh and is idempotent") {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(5, 4, 21.0, 30.0, -16.0, -11.0));
  const NormStats st = hand_stats();
  TimeSeries s = toy_series(grid, 3, [](int t, std::size_t c) {
    return 288.0f + 0.4f * static_cast<float>(t) + 0.05f * static_cast<float>(c % 7);
  });
  auto mesh = std::make_shared<HierMesh>(build_hier_mesh(*grid, {3, 2}));
  auto g = make_graph_stepper(grid, mesh, 8, 1, 91);
  Rng rng(15);
  for (std::size_t k = 0; k < g->n_params(); ++k)
    g->param_data()[k] += rng.normal(0.0, 0.01);

  const auto p1 = temp_path("ecast_graph1.omp1");
  const auto p2 = temp_path("ecast_graph2.omp1");
  save_model(*g, st, p1);
  const LoadedModel l1 = load_model(p1, grid);
  CHECK(std::string(l1.stepper->kind()) == "graph");
  CHECK(l1.stepper->n_params() == g->n_params());
  save_model(*l1.stepper, l1.stats, p2);
  const LoadedModel l2 = load_model(p2, grid);

  const StepInput in = input_at(s, st, 2);
  const std::vector<float> orig = g->step(in);
  StepInput in1 = in;
  in1.stats = &l1.stats;
  const std::vector<float> r1 = l1.stepper->step(in1);
  StepInput in2 = in;
  in2.stats = &l2.stats;
  const std::vector<float> r2 = l2.stepper->step(in2);
  for (std::size_t c = 0; c < grid->n_cells(); ++c) {
    if (!grid->is_sea(c)) continue;
    CHECK(r1[c] == r2[c]);                             // float tensors are stable
    CHECK(orig[c] == doctest::Approx(r1[c]).epsilon(1e-5));
  }
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("model files: persistence round-trip and unknown kind") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(5, 5));
  const NormStats st = hand_stats();
  const auto path = temp_path("ecast_pers.omp1");
  save_model(*make_persistence(), st, path);
  const LoadedModel l = load_model(path, grid);
  CHECK(std::string(l.stepper->kind()) == "persistence");
  CHECK(l.stepper->n_params() == 0);
  CHECK(l.stats.of(Var::u10).state_mean == 2.0);
  std::filesystem::remove(path);
}

TEST_CASE("clone is independent of the original") {
  auto stencil = make_linear_stencil();
  stencil->param_data()[13] = 0.5;
  auto copy = stencil->clone();
  copy->param_data()[13] = -1.0;
  CHECK(stencil->param_data()[13] == 0.5);
  CHECK(copy->param_data()[13] == -1.0);
}
